#include "wbpsim/machine.hpp"

#include <algorithm>
#include <stdexcept>

namespace wbpsim {

std::string_view to_string(PortDirection d) { return d == PortDirection::Bus ? "BUS" : "CORE"; }

std::string_view to_string(RunState s) {
  switch (s) {
    case RunState::Idle: return "IDLE";
    case RunState::Loading: return "LOADING";
    case RunState::Running: return "RUNNING";
    case RunState::Returning: return "RETURNING";
  }
  return "?";
}

std::string_view to_string(SectionKind k) {
  switch (k) {
    case SectionKind::TaskCodePool: return "TASK_CODE_POOL";
    case SectionKind::FifoLists: return "FIFO_LISTS";
    case SectionKind::LoadIndication: return "LOAD_INDICATION";
    case SectionKind::ComputeData: return "COMPUTE_DATA";
  }
  return "?";
}

// ---------------------------------------------------------------- SpmSection

SpmSection::SpmSection(std::size_t base, std::size_t capacity) : base_(base), capacity_(capacity) {
  if (capacity_ > 0) holes_.emplace(0, capacity_);
}

std::optional<RegionId> SpmSection::alloc(std::size_t bytes) {
  if (bytes == 0) throw std::invalid_argument("spm_alloc: size must be > 0");
  for (auto it = holes_.begin(); it != holes_.end(); ++it) {
    if (it->second < bytes) continue;
    const std::size_t offset = it->first;
    const std::size_t rest = it->second - bytes;
    holes_.erase(it);
    if (rest > 0) holes_.emplace(offset + bytes, rest);
    const RegionId id = next_id_++;
    regions_.emplace(id, Region{offset, bytes});
    used_ += bytes;
    high_water_ = std::max(high_water_, used_);
    return id;
  }
  return std::nullopt;
}

void SpmSection::free(RegionId id) {
  auto it = regions_.find(id);
  if (it == regions_.end()) throw ContractViolation("spm_free: unknown region " + std::to_string(id));
  std::size_t offset = it->second.offset;
  std::size_t size = it->second.size;
  used_ -= size;
  regions_.erase(it);

  auto next = holes_.lower_bound(offset);
  if (next != holes_.end() && offset + size == next->first) {
    size += next->second;
    next = holes_.erase(next);
  }
  if (next != holes_.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second == offset) {
      prev->second += size;
      return;
    }
  }
  holes_.emplace(offset, size);
}

const SpmSection::Region& SpmSection::region(RegionId id) const {
  auto it = regions_.find(id);
  if (it == regions_.end()) throw ContractViolation("spm: unknown region " + std::to_string(id));
  return it->second;
}

std::size_t SpmSection::largest_hole() const {
  std::size_t best = 0;
  for (const auto& [off, size] : holes_) best = std::max(best, size);
  return best;
}

bool SpmSection::verify() const {
  std::vector<Region> r;
  r.reserve(regions_.size());
  std::size_t sum = 0;
  for (const auto& [id, reg] : regions_) {
    if (reg.size == 0 || reg.offset + reg.size > capacity_) return false;
    r.push_back(reg);
    sum += reg.size;
  }
  if (sum != used_ || sum > capacity_) return false;
  std::sort(r.begin(), r.end(), [](const Region& a, const Region& b) { return a.offset < b.offset; });
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (r[i - 1].offset + r[i - 1].size > r[i].offset) return false;
  }
  return true;
}

// ---------------------------------------------------------------- engines

Cycles DmaEngine::enqueue(Cycles now, std::size_t n, const DmaTiming& timing) {
  const Cycles start = std::max(now, busy_until);
  busy_until = start + dma_cycles(n, timing);
  ++transfers;
  bytes += n;
  return busy_until;
}

Cycles SchedulerCore::reserve(Cycles now, Cycles duration) {
  const Cycles start = std::max(now, busy_until);
  busy_until = start + duration;
  busy_cycles += duration;
  return busy_until;
}

// ---------------------------------------------------------------- config

void MachineConfig::validate() const {
  if (clusters == 0) throw std::invalid_argument("clusters must be >= 1");
  if (tile_mix.empty()) throw std::invalid_argument("tiles must be >= 1");
  if (tspm_bytes == 0) throw std::invalid_argument("tspm_bytes must be > 0");
  for (std::size_t i = 0; i < kSectionCount; ++i) {
    if (section_bytes[i] == 0) {
      throw std::invalid_argument(std::string(to_string(static_cast<SectionKind>(i))) + " size must be > 0");
    }
  }
  if (max_threads == 0) throw std::invalid_argument("max_threads must be >= 1");
  if (!hierarchical && clusters != 1) throw std::invalid_argument("a single-level system has exactly one cluster");
  if (large.lanes == 0 || small.lanes == 0) throw std::invalid_argument("tile lanes must be > 0");
  if (dma.bytes_per_cycle == 0) throw std::invalid_argument("dma bytes_per_cycle must be > 0");
}

std::size_t MachineConfig::l_tiles() const {
  return static_cast<std::size_t>(std::count(tile_mix.begin(), tile_mix.end(), TileClass::Large));
}

std::size_t MachineConfig::s_tiles() const { return tile_mix.size() - l_tiles(); }

// ---------------------------------------------------------------- monitor

void InvariantMonitor::record(std::uint64_t& counter, const std::string& what) {
  ++counter;
  if (log_.size() < 64) log_.push_back(what);
  if (strict_) throw ProtocolViolation(what);
}

void InvariantMonitor::port_violation(const std::string& what) { record(port_, "port: " + what); }
void InvariantMonitor::spm_overlap(const std::string& what) { record(spm_, "spm: " + what); }
void InvariantMonitor::causality(const std::string& what) { record(causality_, "causality: " + what); }

// ---------------------------------------------------------------- machine

Machine::Machine(MachineConfig cfg, EventQueue& events)
    : cfg_(std::move(cfg)), events_(events), monitor_(cfg_.strict) {
  cfg_.validate();
  const std::size_t engines = cfg_.hierarchical ? cfg_.clusters + 1 : 1;
  dmas_.resize(engines);
  cores_.resize(engines);

  std::size_t base = 0;
  for (std::size_t c = 0; c < cfg_.clusters; ++c) {
    ClusterState cl;
    cl.id = static_cast<ClusterId>(c);
    cl.max_threads = cfg_.max_threads;
    cl.dma = cfg_.hierarchical ? c + 1 : 0;
    cl.core = cfg_.hierarchical ? c + 1 : 0;
    // Each CS-SPM has its own address space; sections are laid out back to back.
    base = 0;
    for (std::size_t s = 0; s < kSectionCount; ++s) {
      cl.sections[s] = SpmSection(base, cfg_.section_bytes[s]);
      base += cfg_.section_bytes[s];
    }
    for (std::size_t t = 0; t < cfg_.tile_mix.size(); ++t) {
      TileState ts;
      ts.id = static_cast<TileId>(t);
      ts.cls = cfg_.tile_mix[t];
      ts.timing = ts.cls == TileClass::Large ? cfg_.large : cfg_.small;
      ts.tspm_capacity = cfg_.tspm_bytes;
      cl.tiles.push_back(ts);
    }
    clusters_.push_back(std::move(cl));
  }
}

Cycles Machine::set_port_direction(ClusterId c, TileId t, PortDirection dir) {
  TileState& tile = cluster(c).tiles.at(t);
  if (tile.run_state == RunState::Running) {
    monitor_.port_violation("port flip on RUNNING tile " + std::to_string(c) + "." + std::to_string(t));
    return cfg_.dma.csr_write_cycles;
  }
  tile.port = dir;
  return cfg_.dma.csr_write_cycles;
}

bool Machine::deploy_to_tile(ClusterId c, TileId t, std::size_t code_bytes, std::size_t data_bytes,
                             Cycles run_cycles, const EventTag& ids, std::function<void()> on_finish) {
  TileState& tile = cluster(c).tiles.at(t);
  if (tile.run_state != RunState::Idle) {
    throw ContractViolation("deploy_to_tile: tile " + std::to_string(c) + "." + std::to_string(t) + " is " +
                            std::string(to_string(tile.run_state)));
  }
  if (code_bytes + data_bytes > tile.tspm_capacity) return false;

  const Cycles csr = cfg_.dma.csr_write_cycles;
  tile.run_state = RunState::Loading;
  const Cycles flipped = cluster_core(c).reserve(events_.now(), csr);
  set_port_direction(c, t, inject_ ? PortDirection::Core : PortDirection::Bus);
  inject_ = false;
  const Cycles loaded = cluster_dma(c).enqueue(flipped, code_bytes + data_bytes, cfg_.dma);

  EventTag tag = ids;
  tag.kind = EventKind::DmaDone;
  tag.cluster = c;
  tag.tile = t;
  tag.bytes = code_bytes + data_bytes;
  events_.post(loaded, tag, [this, c, t, run_cycles, ids, on_finish = std::move(on_finish)]() mutable {
    TileState& tl = cluster(c).tiles.at(t);
    if (tl.port != PortDirection::Bus) {
      monitor_.port_violation("DMA write to T-SPM of tile " + std::to_string(c) + "." + std::to_string(t) +
                              " while port=CORE");
    }
    check_spm(c);
    const Cycles csr = cfg_.dma.csr_write_cycles;
    const Cycles start = cluster_core(c).reserve(events_.now(), 2 * csr);
    set_port_direction(c, t, PortDirection::Core);
    tl.reset_active = false;
    tl.run_state = RunState::Running;
    tl.run_start = start;

    EventTag done = ids;
    done.kind = EventKind::TileDone;
    done.cluster = c;
    done.tile = t;
    done.bytes = 0;
    events_.post(start + run_cycles, done, [this, c, t, on_finish = std::move(on_finish)]() {
      const TileState& tl2 = cluster(c).tiles.at(t);
      if (tl2.port != PortDirection::Core || tl2.reset_active) {
        monitor_.port_violation("tile " + std::to_string(c) + "." + std::to_string(t) +
                                " executed without owning its T-SPM port");
      }
      on_finish();
    });
  });
  return true;
}

void Machine::complete_from_tile(ClusterId c, TileId t, std::uint32_t return_values, const EventTag& ids,
                                 std::function<void()> on_interrupt) {
  TileState& tile = cluster(c).tiles.at(t);
  if (tile.run_state != RunState::Running) {
    throw ContractViolation("complete_from_tile: tile is " + std::string(to_string(tile.run_state)));
  }
  tile.busy_cycles += events_.now() - tile.run_start;
  ++tile.tasks_run;
  tile.return_value_count = return_values;
  tile.reset_active = true;
  tile.run_state = RunState::Returning;
  const Cycles csr = set_port_direction(c, t, PortDirection::Bus);

  EventTag tag = ids;
  tag.kind = EventKind::Interrupt;
  tag.cluster = c;
  tag.tile = t;
  tag.bytes = 0;
  events_.post(events_.now() + csr, tag, std::move(on_interrupt));
}

void Machine::retrieve_from_tile(ClusterId c, TileId t, std::size_t bytes, const EventTag& ids,
                                 std::function<void()> on_done) {
  TileState& tile = cluster(c).tiles.at(t);
  if (tile.run_state != RunState::Returning) {
    throw ContractViolation("retrieve_from_tile: tile is " + std::string(to_string(tile.run_state)));
  }
  const Cycles programmed = cluster_core(c).reserve(events_.now(), cfg_.dma.csr_write_cycles);
  const Cycles done_at = cluster_dma(c).enqueue(programmed, bytes, cfg_.dma);
  EventTag tag = ids;
  tag.kind = EventKind::DmaDone;
  tag.cluster = c;
  tag.tile = t;
  tag.bytes = bytes;
  events_.post(done_at, tag, [this, c, t, on_done = std::move(on_done)]() {
    TileState& tl = cluster(c).tiles.at(t);
    if (tl.port != PortDirection::Bus) {
      monitor_.port_violation("DMA read from T-SPM of tile " + std::to_string(c) + "." + std::to_string(t) +
                              " while port=CORE");
    }
    tl.run_state = RunState::Idle;
    tl.last_finish = events_.now();
    check_spm(c);
    on_done();
  });
}

Cycles Machine::main_transfer(ClusterId c, std::size_t bytes, const EventTag& ids, std::function<void()> on_done) {
  const Cycles programmed = main_core().reserve(events_.now(), cfg_.dma.csr_write_cycles);
  const Cycles done_at = main_dma().enqueue(programmed, bytes, cfg_.dma);
  EventTag tag = ids;
  tag.kind = EventKind::DmaDone;
  tag.cluster = c;
  tag.bytes = bytes;
  events_.post(done_at, tag, [this, c, on_done = std::move(on_done)]() {
    check_spm(c);
    on_done();
  });
  return done_at;
}

Cycles Machine::dma_transfer(ClusterId c, SectionKind src_section, RegionId src, SectionKind dst_section,
                             RegionId dst, std::size_t bytes, const EventTag& ids, std::function<void()> on_done) {
  ClusterState& cl = cluster(c);
  if (!cl.section(src_section).contains(src) || !cl.section(dst_section).contains(dst)) {
    throw ContractViolation("dma_transfer: region not allocated");
  }
  const Cycles done_at = cluster_dma(c).enqueue(events_.now(), bytes, cfg_.dma);
  EventTag tag = ids;
  tag.kind = EventKind::DmaDone;
  tag.cluster = c;
  tag.bytes = bytes;
  events_.post(done_at, tag, std::move(on_done));
  return done_at;
}

void Machine::check_spm(ClusterId c) {
  const ClusterState& cl = cluster(c);
  for (std::size_t s = 0; s < kSectionCount; ++s) {
    if (!cl.sections[s].verify()) {
      monitor_.spm_overlap("cluster " + std::to_string(c) + " section " +
                           std::string(to_string(static_cast<SectionKind>(s))));
    }
  }
}

}  // namespace wbpsim
