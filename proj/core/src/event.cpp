#include "wbpsim/event.hpp"

#include <cstdio>

namespace wbpsim {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::DmaDone: return "DMA_DONE";
    case EventKind::TileDone: return "TILE_DONE";
    case EventKind::Interrupt: return "INTERRUPT";
    case EventKind::SchedTick: return "SCHED_TICK";
    case EventKind::ThreadArrival: return "THREAD_ARRIVAL";
  }
  return "?";
}

std::uint64_t EventQueue::post(Cycles time, const EventTag& tag, Handler fn) {
  if (time < now_) {
    throw ContractViolation("event posted in the past: t=" + std::to_string(time) + " now=" + std::to_string(now_));
  }
  const auto seq = next_seq_++;
  heap_.push(Item{time, seq, tag, std::move(fn)});
  return seq;
}

bool EventQueue::step() {
  if (heap_.empty()) return false;
  // priority_queue::top is const; the handler is moved out via a copy of the
  // node, which is cheap relative to the handlers themselves.
  Item item = heap_.top();
  heap_.pop();
  dispatch(std::move(item));
  return true;
}

void EventQueue::run_until(Cycles t) {
  while (!heap_.empty() && heap_.top().time <= t) step();
  if (t > now_) now_ = t;
}

Cycles EventQueue::run() {
  while (step()) {
  }
  return now_;
}

void EventQueue::dispatch(Item item) {
  if (item.time < last_dispatch_) ++causality_violations_;
  last_dispatch_ = item.time;
  now_ = item.time;
  ++dispatched_;

  auto mix = [this](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      digest_ ^= (v >> (8 * i)) & 0xffU;
      digest_ *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(item.tag.kind));
  mix(item.time);
  mix(item.tag.cluster);
  mix(item.tag.tile);
  mix(item.tag.thread);
  mix(item.tag.task);
  mix(item.tag.bytes);

  if (trace_) {
    auto id = [](std::uint32_t v) { return v == kNoId ? std::string("null") : std::to_string(v); };
    *trace_ << "{\"t\":" << item.time << ",\"seq\":" << item.seq << ",\"kind\":\"" << to_string(item.tag.kind)
            << "\",\"cluster\":" << id(item.tag.cluster) << ",\"tile\":" << id(item.tag.tile)
            << ",\"thread\":" << id(item.tag.thread) << ",\"task\":" << id(item.tag.task)
            << ",\"bytes\":" << item.tag.bytes << "}\n";
  }
  if (item.fn) item.fn();
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace wbpsim
