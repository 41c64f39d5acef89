#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wbpsim/cost_model.hpp"
#include "wbpsim/event.hpp"
#include "wbpsim/types.hpp"

namespace wbpsim {

enum class PortDirection : std::uint8_t { Bus, Core };
enum class RunState : std::uint8_t { Idle, Loading, Running, Returning };
std::string_view to_string(PortDirection d);
std::string_view to_string(RunState s);

enum class SectionKind : std::uint8_t { TaskCodePool, FifoLists, LoadIndication, ComputeData };
inline constexpr std::size_t kSectionCount = 4;
std::string_view to_string(SectionKind k);

/// First-fit allocator over one CS-SPM section. Freed regions coalesce with
/// adjacent holes.
class SpmSection {
 public:
  struct Region {
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  SpmSection() = default;
  SpmSection(std::size_t base, std::size_t capacity);

  /// std::nullopt when no hole fits. Throws std::invalid_argument for 0 bytes.
  std::optional<RegionId> alloc(std::size_t bytes);
  /// Throws ContractViolation for an unknown region.
  void free(RegionId id);

  bool contains(RegionId id) const { return regions_.count(id) != 0; }
  const Region& region(RegionId id) const;
  std::size_t address(RegionId id) const { return base_ + region(id).offset; }
  bool can_fit(std::size_t bytes) const { return largest_hole() >= bytes; }

  std::size_t base() const noexcept { return base_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t used() const noexcept { return used_; }
  std::size_t free_bytes() const noexcept { return capacity_ - used_; }
  std::size_t largest_hole() const;
  std::size_t allocation_count() const noexcept { return regions_.size(); }
  std::size_t high_water() const noexcept { return high_water_; }

  /// Independent check: regions lie within capacity and do not overlap.
  bool verify() const;

 private:
  std::size_t base_ = 0;
  std::size_t capacity_ = 0;
  std::size_t used_ = 0;
  std::size_t high_water_ = 0;
  RegionId next_id_ = 1;
  std::map<RegionId, Region> regions_;
  std::map<std::size_t, std::size_t> holes_;  // offset -> size
};

/// A serialized burst engine: one transfer in flight at a time.
struct DmaEngine {
  Cycles busy_until = 0;
  std::uint64_t transfers = 0;
  std::uint64_t bytes = 0;

  /// Completion time of a transfer requested at `now`; advances busy_until.
  Cycles enqueue(Cycles now, std::size_t bytes, const DmaTiming& timing);
};

/// A scheduler core: every scheduling action reserves a contiguous interval.
struct SchedulerCore {
  Cycles busy_until = 0;
  Cycles busy_cycles = 0;

  Cycles reserve(Cycles now, Cycles duration);
};

struct TileState {
  TileId id = 0;
  TileClass cls = TileClass::Large;
  TileTiming timing{};
  std::size_t tspm_capacity = 0;
  PortDirection port = PortDirection::Bus;
  bool reset_active = true;
  std::uint32_t return_value_count = 0;
  RunState run_state = RunState::Idle;

  Cycles run_start = 0;
  Cycles busy_cycles = 0;
  std::optional<Cycles> last_finish;  ///< empty while never used
  std::uint64_t tasks_run = 0;
};

struct ClusterState {
  ClusterId id = 0;
  std::vector<TileState> tiles;
  std::array<SpmSection, kSectionCount> sections;
  std::size_t max_threads = 1;
  std::set<ThreadId> active;
  std::size_t dma = 0;   ///< index into Machine DMA engines
  std::size_t core = 0;  ///< index into Machine scheduler cores

  SpmSection& section(SectionKind k) { return sections[static_cast<std::size_t>(k)]; }
  const SpmSection& section(SectionKind k) const { return sections[static_cast<std::size_t>(k)]; }
};

struct MachineConfig {
  std::size_t clusters = 1;
  std::vector<TileClass> tile_mix{TileClass::Large};
  std::size_t tspm_bytes = 64 * 1024;
  /// TASK_CODE_POOL, FIFO_LISTS, LOAD_INDICATION, COMPUTE_DATA
  std::array<std::size_t, kSectionCount> section_bytes{128 * 1024, 8 * 1024, 2 * 1024, 256 * 1024};
  std::size_t max_threads = 2;
  /// false: single-level system, where the main scheduler and the one
  /// cluster's L2 scheduler share a core and a DMA engine.
  bool hierarchical = true;
  TileTiming large = kLargeTile;
  TileTiming small = kSmallTile;
  DmaTiming dma{};
  SchedulerTiming sched{};
  bool strict = true;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  std::size_t l_tiles() const;
  std::size_t s_tiles() const;
};

/// Records protocol and accounting violations. In strict mode the first one
/// throws ProtocolViolation.
class InvariantMonitor {
 public:
  explicit InvariantMonitor(bool strict) : strict_(strict) {}

  void port_violation(const std::string& what);
  void spm_overlap(const std::string& what);
  void causality(const std::string& what);

  std::uint64_t port_violations() const noexcept { return port_; }
  std::uint64_t spm_overlaps() const noexcept { return spm_; }
  std::uint64_t causality_violations() const noexcept { return causality_; }
  std::uint64_t total() const noexcept { return port_ + spm_ + causality_; }
  const std::vector<std::string>& log() const noexcept { return log_; }

 private:
  void record(std::uint64_t& counter, const std::string& what);

  bool strict_;
  std::uint64_t port_ = 0, spm_ = 0, causality_ = 0;
  std::vector<std::string> log_;
};

/// The timed hardware: clusters of tiles, CS-SPMs, DMA engines, scheduler
/// cores and the pack-and-ship protocol, driven by an EventQueue.
class Machine {
 public:
  Machine(MachineConfig cfg, EventQueue& events);

  const MachineConfig& config() const noexcept { return cfg_; }
  EventQueue& events() noexcept { return events_; }
  InvariantMonitor& monitor() noexcept { return monitor_; }
  const InvariantMonitor& monitor() const noexcept { return monitor_; }

  std::size_t cluster_count() const noexcept { return clusters_.size(); }
  ClusterState& cluster(ClusterId c) { return clusters_.at(c); }
  const ClusterState& cluster(ClusterId c) const { return clusters_.at(c); }
  std::vector<ClusterState>& clusters() noexcept { return clusters_; }
  const std::vector<ClusterState>& clusters() const noexcept { return clusters_; }

  DmaEngine& main_dma() { return dmas_.at(0); }
  SchedulerCore& main_core() { return cores_.at(0); }
  DmaEngine& cluster_dma(ClusterId c) { return dmas_.at(cluster(c).dma); }
  SchedulerCore& cluster_core(ClusterId c) { return cores_.at(cluster(c).core); }
  const std::vector<DmaEngine>& dma_engines() const noexcept { return dmas_; }
  const std::vector<SchedulerCore>& cores() const noexcept { return cores_; }

  /// Port flip on a tile's T-SPM. Returns the CSR write latency. Reports a
  /// protocol violation if the tile is RUNNING (and leaves the port alone).
  Cycles set_port_direction(ClusterId c, TileId t, PortDirection dir);

  /// Pack-and-ship deploy starting at now(): port->BUS, one DMA burst of
  /// code + data, port->CORE, reset released. The tile runs for
  /// `run_cycles` and `on_finish` fires at the TILE_DONE event. Returns false
  /// (tile untouched) if the bundle exceeds the T-SPM. Throws
  /// ContractViolation if the tile is not IDLE.
  bool deploy_to_tile(ClusterId c, TileId t, std::size_t code_bytes, std::size_t data_bytes, Cycles run_cycles,
                      const EventTag& ids, std::function<void()> on_finish);

  /// Tile-side completion: return_value_count CSR set, reset asserted, port
  /// flipped to BUS; the interrupt reaches the scheduler one CSR write later.
  void complete_from_tile(ClusterId c, TileId t, std::uint32_t return_values, const EventTag& ids,
                          std::function<void()> on_interrupt);

  /// Retrieval DMA from a RETURNING tile into the CS-SPM; the tile is IDLE
  /// once `on_done` fires.
  void retrieve_from_tile(ClusterId c, TileId t, std::size_t bytes, const EventTag& ids,
                          std::function<void()> on_done);

  /// Main memory -> CS-SPM transfer on the main DMA engine, preceded by one
  /// CSR write on the main scheduler core.
  Cycles main_transfer(ClusterId c, std::size_t bytes, const EventTag& ids, std::function<void()> on_done);

  /// Region-to-region copy on a cluster's DMA engine. Throws
  /// ContractViolation if either region is not allocated.
  Cycles dma_transfer(ClusterId c, SectionKind src_section, RegionId src, SectionKind dst_section, RegionId dst,
                      std::size_t bytes, const EventTag& ids, std::function<void()> on_done);

  /// Verifies every section of the cluster; overlaps go to the monitor.
  void check_spm(ClusterId c);

  /// Test hook: the next deploy skips its port->BUS flip.
  void inject_violation() noexcept { inject_ = true; }

 private:
  MachineConfig cfg_;
  EventQueue& events_;
  InvariantMonitor monitor_;
  std::vector<ClusterState> clusters_;
  std::vector<DmaEngine> dmas_;
  std::vector<SchedulerCore> cores_;
  bool inject_ = false;
};

}  // namespace wbpsim
