#pragma once

#include <functional>
#include <ostream>
#include <queue>
#include <string_view>
#include <vector>

#include "wbpsim/types.hpp"

namespace wbpsim {

enum class EventKind : std::uint8_t { DmaDone, TileDone, Interrupt, SchedTick, ThreadArrival };
std::string_view to_string(EventKind k);

inline constexpr std::uint32_t kNoId = 0xffffffffU;

/// Principal ids recorded in the trace. Unused fields stay kNoId / 0.
struct EventTag {
  EventKind kind = EventKind::SchedTick;
  std::uint32_t cluster = kNoId;
  std::uint32_t tile = kNoId;
  std::uint32_t thread = kNoId;
  std::uint32_t task = kNoId;
  std::uint64_t bytes = 0;
};

/// Deterministic discrete-event loop. Events are totally ordered by
/// (time, seq); seq is assigned at post time.
class EventQueue {
 public:
  using Handler = std::function<void()>;

  /// Throws ContractViolation if time < now().
  std::uint64_t post(Cycles time, const EventTag& tag, Handler fn);

  /// Dispatches every event with time <= t, then sets the clock to t.
  void run_until(Cycles t);
  /// Dispatches until the queue is empty. Returns the time of the last event.
  Cycles run();
  /// Dispatches a single event; false if the queue is empty.
  bool step();

  Cycles now() const noexcept { return now_; }
  bool empty() const noexcept { return heap_.empty(); }
  std::size_t pending() const noexcept { return heap_.size(); }
  std::uint64_t dispatched() const noexcept { return dispatched_; }
  /// Dispatch-time regressions observed (always 0 unless the heap is broken).
  std::uint64_t causality_violations() const noexcept { return causality_violations_; }

  /// Rolling FNV-1a hash over (kind, time, ids, bytes) of dispatched events.
  std::uint64_t digest() const noexcept { return digest_; }

  /// Optional JSON-lines trace sink; does not influence the digest.
  void set_trace(std::ostream* out) noexcept { trace_ = out; }

 private:
  struct Item {
    Cycles time;
    std::uint64_t seq;
    EventTag tag;
    Handler fn;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void dispatch(Item item);

  std::priority_queue<Item, std::vector<Item>, Later> heap_;
  Cycles now_ = 0;
  Cycles last_dispatch_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t dispatched_ = 0;
  std::uint64_t causality_violations_ = 0;
  std::uint64_t digest_ = 0xcbf29ce484222325ULL;
  std::ostream* trace_ = nullptr;
};

std::string digest_hex(std::uint64_t digest);

}  // namespace wbpsim
