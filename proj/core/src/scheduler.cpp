#include "wbpsim/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>
#include <stdexcept>

namespace wbpsim {

std::string_view to_string(ThreadStatus s) {
  switch (s) {
    case ThreadStatus::Ready: return "READY";
    case ThreadStatus::Registered: return "REGISTERED";
    case ThreadStatus::Running: return "RUNNING";
    case ThreadStatus::Done: return "DONE";
  }
  return "?";
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::Hit: return "HIT";
    case Decision::Admit: return "ADMIT";
    case Decision::Evict: return "EVICT";
    case Decision::Wait: return "WAIT";
  }
  return "?";
}

std::string to_string(const DecisionRecord& r) {
  std::ostringstream os;
  os << "t" << r.thread << ' ' << to_string(r.decision) << " c=";
  if (r.cluster) {
    os << *r.cluster;
  } else {
    os << '-';
  }
  os << " dag_bytes=" << r.dag_bytes;
  if (r.evicted) os << " evicted=" << std::hex << *r.evicted;
  return os.str();
}

std::size_t ThreadDescriptor::data_bytes() const {
  std::size_t n = 0;
  for (const auto& t : data) n += t.byte_size();
  return n;
}

// ---------------------------------------------------------------- payloads

namespace {

constexpr std::uint32_t kPackMagic = 0x4b504257;  // "WBPK"
constexpr std::uint16_t kPackVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

struct Reader {
  std::span<const std::uint8_t> in;
  std::size_t pos = 0;

  template <typename T>
  T get() {
    if (pos + sizeof(T) > in.size()) throw std::invalid_argument("mem_unpack: truncated payload");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
};

}  // namespace

PackedPayload mem_pack(std::span<const Token> data, const Dag& dag) {
  std::ostringstream text;
  write_dag(text, dag);
  const std::string dag_text = text.str();

  PackedPayload p;
  p.code_bytes = kPackHeaderBytes + dag.total_code_bytes();
  for (const auto& t : data) p.data_bytes += t.byte_size();

  auto& b = p.bytes;
  put<std::uint32_t>(b, kPackMagic);
  put<std::uint16_t>(b, kPackVersion);
  put<std::uint16_t>(b, static_cast<std::uint16_t>(data.size()));
  put<std::uint64_t>(b, dag.id());
  put<std::uint32_t>(b, static_cast<std::uint32_t>(dag.total_code_bytes()));
  put<std::uint32_t>(b, static_cast<std::uint32_t>(dag_text.size()));
  put<std::uint32_t>(b, static_cast<std::uint32_t>(p.data_bytes));
  put<std::uint32_t>(b, 0);
  b.insert(b.end(), dag_text.begin(), dag_text.end());

  for (const auto& t : data) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, BitVec>) {
            put<std::uint8_t>(b, 0);
            put<std::uint32_t>(b, static_cast<std::uint32_t>(v.size()));
            b.insert(b.end(), v.begin(), v.end());
          } else if constexpr (std::is_same_v<T, CplxVec>) {
            put<std::uint8_t>(b, 1);
            put<std::uint32_t>(b, static_cast<std::uint32_t>(v.size()));
            for (const auto& c : v) {
              put<double>(b, c.real());
              put<double>(b, c.imag());
            }
          } else if constexpr (std::is_same_v<T, LlrVec>) {
            put<std::uint8_t>(b, 2);
            put<std::uint32_t>(b, static_cast<std::uint32_t>(v.size()));
            for (double x : v) put<double>(b, x);
          } else {
            put<std::uint8_t>(b, 3);
            put<std::uint32_t>(b, 1);
            put<std::int64_t>(b, v.value);
          }
        },
        t.payload);
  }
  return p;
}

UnpackedPayload mem_unpack(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  if (r.get<std::uint32_t>() != kPackMagic) throw std::invalid_argument("mem_unpack: bad magic");
  if (r.get<std::uint16_t>() != kPackVersion) throw std::invalid_argument("mem_unpack: unsupported version");
  const auto n_tokens = r.get<std::uint16_t>();
  UnpackedPayload u;
  u.dag_id = r.get<std::uint64_t>();
  const auto code_bytes = r.get<std::uint32_t>();
  const auto text_len = r.get<std::uint32_t>();
  const auto data_bytes = r.get<std::uint32_t>();
  r.get<std::uint32_t>();
  if (r.pos + text_len > bytes.size()) throw std::invalid_argument("mem_unpack: truncated DAG section");
  std::istringstream text(std::string(reinterpret_cast<const char*>(bytes.data() + r.pos), text_len));
  r.pos += text_len;
  u.dag = parse_dag(text);
  u.dag.finalize();
  if (u.dag.id() != u.dag_id || u.dag.total_code_bytes() != code_bytes) {
    throw std::invalid_argument("mem_unpack: DAG section does not match header");
  }
  std::size_t seen = 0;
  for (std::size_t i = 0; i < n_tokens; ++i) {
    const auto type = r.get<std::uint8_t>();
    const auto n = r.get<std::uint32_t>();
    Token t;
    switch (type) {
      case 0: {
        BitVec v(n);
        for (auto& x : v) x = r.get<std::uint8_t>();
        t.payload = std::move(v);
        break;
      }
      case 1: {
        CplxVec v(n);
        for (auto& x : v) {
          const double re = r.get<double>();
          const double im = r.get<double>();
          x = {re, im};
        }
        t.payload = std::move(v);
        break;
      }
      case 2: {
        LlrVec v(n);
        for (auto& x : v) x = r.get<double>();
        t.payload = std::move(v);
        break;
      }
      case 3: t.payload = Scalar{r.get<std::int64_t>()}; break;
      default: throw std::invalid_argument("mem_unpack: unknown token type");
    }
    seen += t.byte_size();
    u.data.push_back(std::move(t));
  }
  if (seen != data_bytes) throw std::invalid_argument("mem_unpack: token bytes do not match header");
  return u;
}

// ---------------------------------------------------------------- table

DeploymentEntry* DeploymentTable::find(DagId dag, ClusterId c) {
  auto it = entries_.find({c, dag});
  return it == entries_.end() ? nullptr : &it->second;
}

const DeploymentEntry* DeploymentTable::find(DagId dag, ClusterId c) const {
  auto it = entries_.find({c, dag});
  return it == entries_.end() ? nullptr : &it->second;
}

DeploymentEntry& DeploymentTable::add(const DeploymentEntry& e) {
  auto [it, inserted] = entries_.emplace(std::make_pair(e.cluster, e.dag_id), e);
  if (!inserted) throw ContractViolation("deployment table: duplicate (dag, cluster) entry");
  return it->second;
}

void DeploymentTable::erase(DagId dag, ClusterId c) { entries_.erase({c, dag}); }

std::vector<const DeploymentEntry*> DeploymentTable::entries() const {
  std::vector<const DeploymentEntry*> v;
  for (const auto& [k, e] : entries_) v.push_back(&e);
  return v;
}

std::vector<DeploymentEntry*> DeploymentTable::entries() {
  std::vector<DeploymentEntry*> v;
  for (auto& [k, e] : entries_) v.push_back(&e);
  return v;
}

// ---------------------------------------------------------------- runtime

Runtime::Runtime(Machine& machine, TaskExecutor& executor, Options opts)
    : machine_(machine), events_(machine.events()), executor_(executor), opts_(std::move(opts)) {
  const auto n = machine_.cluster_count();
  resident_.resize(n);
  inflight_.resize(n);
  for (std::size_t c = 0; c < n; ++c) inflight_[c].resize(machine_.cluster(static_cast<ClusterId>(c)).tiles.size());
  scan_pending_.assign(n, false);
  peak_threads_.assign(n, 0);
}

std::size_t Runtime::effective_max_threads(ClusterId c) const {
  return opts_.flags.multithreading ? machine_.cluster(c).max_threads : 1;
}

bool Runtime::slot_free(ClusterId c) const { return machine_.cluster(c).active.size() < effective_max_threads(c); }

std::size_t Runtime::code_footprint(const Dag& dag) const { return kPackHeaderBytes + dag.total_code_bytes(); }

std::size_t Runtime::fifo_footprint(const Dag& dag) const {
  return std::max<std::size_t>(1, dag.edges().size() * opts_.fifo_bytes_per_edge);
}

std::size_t Runtime::incomplete_threads() const {
  std::size_t n = 0;
  for (const auto& [id, ts] : threads_) {
    if (ts.desc.status != ThreadStatus::Done) ++n;
  }
  return n;
}

void Runtime::add_ready_thread(ThreadDescriptor t) {
  if (!t.dag || !t.dag->finalized()) throw std::invalid_argument("thread DAG must be finalized");
  if (t.data.size() != t.dag->input_edges().size()) {
    throw std::invalid_argument("thread " + std::to_string(t.id) + ": expected " +
                                std::to_string(t.dag->input_edges().size()) + " input tokens");
  }
  const ThreadId id = t.id;
  auto [it, inserted] = threads_.emplace(id, ThreadState{});
  if (!inserted) throw std::invalid_argument("duplicate thread id " + std::to_string(id));
  it->second.desc = std::move(t);
  it->second.desc.status = ThreadStatus::Ready;
  tset_.push_back(id);
}

void Runtime::submit(ThreadDescriptor t) {
  const ThreadId id = t.id;
  const Cycles at = t.arrival_time;
  if (!t.dag || !t.dag->finalized()) throw std::invalid_argument("thread DAG must be finalized");
  if (t.data.size() != t.dag->input_edges().size()) {
    throw std::invalid_argument("thread " + std::to_string(id) + ": expected " +
                                std::to_string(t.dag->input_edges().size()) + " input tokens");
  }
  auto [it, inserted] = threads_.emplace(id, ThreadState{});
  if (!inserted) throw std::invalid_argument("duplicate thread id " + std::to_string(id));
  it->second.desc = std::move(t);
  it->second.desc.status = ThreadStatus::Ready;
  EventTag tag{EventKind::ThreadArrival};
  tag.thread = id;
  events_.post(at, tag, [this, id] { on_arrival(id); });
}

void Runtime::on_arrival(ThreadId t) {
  tset_.push_back(t);
  ++progress_;
  request_main_pass();
}

Cycles Runtime::run() {
  events_.run();
  if (events_.causality_violations() > 0) machine_.monitor().causality("event dispatched before its predecessor");
  if (const auto left = incomplete_threads(); left > 0) {
    throw std::runtime_error("simulation stalled with " + std::to_string(left) +
                             " incomplete thread(s): no schedulable resources remain");
  }
  return events_.now();
}

// ---------------------------------------------------------------- thread level

std::optional<ClusterId> Runtime::code_deployed(ThreadId t) const {
  if (!opts_.flags.lazy_deletion) return std::nullopt;
  const auto& ts = threads_.at(t);
  const DagId id = ts.desc.dag->id();
  for (std::size_t c = 0; c < machine_.cluster_count(); ++c) {
    const auto cid = static_cast<ClusterId>(c);
    if (table_.find(id, cid) && slot_free(cid)) return cid;
  }
  return std::nullopt;
}

bool Runtime::thread_manager_query(ClusterId c, ThreadId t) const {
  if (!slot_free(c)) return false;
  const auto& cl = machine_.cluster(c);
  const auto& desc = threads_.at(t).desc;
  return cl.section(SectionKind::TaskCodePool).can_fit(code_footprint(*desc.dag)) &&
         cl.section(SectionKind::FifoLists).can_fit(fifo_footprint(*desc.dag)) &&
         cl.section(SectionKind::ComputeData).can_fit(desc.data_bytes() + opts_.scratch_reserve_bytes);
}

std::optional<ClusterId> Runtime::get_cluster_lru(std::size_t code_bytes) {
  if (table_.empty()) {
    for (std::size_t c = 0; c < machine_.cluster_count(); ++c) {
      const auto cid = static_cast<ClusterId>(c);
      if (slot_free(cid) && machine_.cluster(cid).section(SectionKind::TaskCodePool).can_fit(code_bytes)) return cid;
    }
    return std::nullopt;
  }
  DeploymentEntry* victim = nullptr;
  for (DeploymentEntry* e : table_.entries()) {
    if (e->active_threads != 0 || !slot_free(e->cluster)) continue;
    if (!victim || e->last_used < victim->last_used ||
        (e->last_used == victim->last_used && e->cluster < victim->cluster)) {
      victim = e;
    }
  }
  if (!victim) return std::nullopt;
  const ClusterId c = victim->cluster;
  const DagId dag = victim->dag_id;
  machine_.cluster(c).section(SectionKind::TaskCodePool).free(victim->code_region);
  table_.erase(dag, c);
  ++metrics_.evictions;
  last_evicted_ = dag;
  return c;
}

std::optional<Address> Runtime::mem_alloc(ClusterId c, ThreadId t, bool with_dag) {
  auto& ts = threads_.at(t);
  auto& cl = machine_.cluster(c);
  const Dag& dag = *ts.desc.dag;
  auto& code = cl.section(SectionKind::TaskCodePool);
  auto& fifo = cl.section(SectionKind::FifoLists);
  auto& data = cl.section(SectionKind::ComputeData);

  std::optional<RegionId> code_r;
  if (with_dag) {
    code_r = code.alloc(code_footprint(dag));
    if (!code_r) return std::nullopt;
  }
  auto fifo_r = fifo.alloc(fifo_footprint(dag));
  if (!fifo_r) {
    if (code_r) code.free(*code_r);
    return std::nullopt;
  }
  const std::size_t data_bytes = ts.desc.data_bytes();
  auto data_r = data.alloc(std::max<std::size_t>(1, data_bytes));
  if (!data_r) {
    fifo.free(*fifo_r);
    if (code_r) code.free(*code_r);
    return std::nullopt;
  }
  ts.fifo_region = *fifo_r;
  ts.data_region = *data_r;
  ts.private_code = code_r.value_or(0);

  Address a;
  a.cluster = c;
  a.data_address = data.address(*data_r);
  a.dag_shipped = with_dag;
  a.transfer_bytes = with_dag ? mem_pack(ts.desc.data, dag).accounted_bytes() : data_bytes;
  return a;
}

void Runtime::admit(ThreadState& ts, const Address& a, Decision d, std::optional<DagId> evicted, AddressSet& aset) {
  const ClusterId c = a.cluster;
  auto& cl = machine_.cluster(c);
  const ThreadId id = ts.desc.id;
  ts.cluster = c;
  ts.desc.status = ThreadStatus::Registered;
  cl.active.insert(id);
  peak_threads_[c] = std::max(peak_threads_[c], cl.active.size());
  ++progress_;

  const DagId dag_id = ts.desc.dag->id();
  // threadRegistration: the (dag, cluster) pair enters the table and takes
  // over the freshly placed code. The literal control flow only reaches it
  // on the eviction path.
  const bool register_code = a.dag_shipped && opts_.flags.lazy_deletion &&
                             (d == Decision::Evict || !opts_.flags.strict_algorithm);
  if (register_code) {
    DeploymentEntry e;
    e.dag_id = dag_id;
    e.cluster = c;
    e.last_used = events_.now();
    e.code_region = ts.private_code;
    e.code_bytes = code_footprint(*ts.desc.dag);
    table_.add(e);
    ts.private_code = 0;
  }
  if (ts.private_code == 0) {
    if (DeploymentEntry* e = table_.find(dag_id, c)) {
      ++e->active_threads;
      e->last_used = std::max(e->last_used, events_.now());
      ts.uses_entry = true;
    }
  }

  aset[id] = a;
  ++metrics_.data_transfers;
  metrics_.data_bytes += ts.desc.data_bytes();
  std::size_t dag_bytes = 0;
  if (a.dag_shipped) {
    ++metrics_.dag_transfers;
    dag_bytes = code_footprint(*ts.desc.dag);
    metrics_.dag_bytes += dag_bytes;
  }
  if (d == Decision::Hit) ++metrics_.residency_hits;
  decisions_.push_back(DecisionRecord{id, d, c, dag_bytes, evicted});
}

AddressSet Runtime::thread_schedule() {
  AddressSet aset;
  const std::size_t n_clusters = machine_.cluster_count();
  auto any_slot = [&] {
    for (std::size_t c = 0; c < n_clusters; ++c) {
      if (slot_free(static_cast<ClusterId>(c))) return true;
    }
    return false;
  };

  for (ThreadId tid : tset_) {
    ThreadState& ts = threads_.at(tid);
    if (ts.desc.status != ThreadStatus::Ready) continue;
    if (!any_slot()) break;

    // Find a cluster that has already deployed the DAG before.
    if (auto c = code_deployed(tid)) {
      const auto& data = machine_.cluster(*c).section(SectionKind::ComputeData);
      std::optional<Address> a;
      if (data.can_fit(ts.desc.data_bytes() + opts_.scratch_reserve_bytes)) a = mem_alloc(*c, tid, false);
      if (a) {
        admit(ts, *a, Decision::Hit, std::nullopt, aset);
      } else {
        ++metrics_.backpressure_events;
        decisions_.push_back(DecisionRecord{tid, Decision::Wait, *c, 0, std::nullopt});
      }
      continue;
    }

    // Make an inquiry per cluster.
    bool placed = false;
    for (std::size_t c = 0; c < n_clusters && !placed; ++c) {
      const auto cid = static_cast<ClusterId>(c);
      if (!thread_manager_query(cid, tid)) continue;
      if (auto a = mem_alloc(cid, tid, true)) {
        admit(ts, *a, Decision::Admit, std::nullopt, aset);
        placed = true;
      }
    }
    if (placed) continue;

    // Drop the least recently used DAG.
    last_evicted_.reset();
    const std::size_t code = code_footprint(*ts.desc.dag);
    if (auto c = opts_.flags.lazy_deletion ? get_cluster_lru(code) : std::nullopt) {
      if (auto a = mem_alloc(*c, tid, true)) {
        admit(ts, *a, Decision::Evict, last_evicted_, aset);
        continue;
      }
      decisions_.push_back(DecisionRecord{tid, Decision::Evict, *c, 0, last_evicted_});
    }
    ++metrics_.backpressure_events;
    decisions_.push_back(DecisionRecord{tid, Decision::Wait, std::nullopt, 0, std::nullopt});
  }

  std::erase_if(tset_, [&](ThreadId t) { return threads_.at(t).desc.status != ThreadStatus::Ready; });
  return aset;
}

void Runtime::land_thread(ThreadId t) {
  ThreadState& ts = threads_.at(t);
  if (ts.desc.status != ThreadStatus::Registered || !ts.cluster) {
    throw ContractViolation("land_thread: thread " + std::to_string(t) + " is not registered");
  }
  ts.desc.status = ThreadStatus::Running;
  ts.instance = std::make_unique<DagInstance>(ts.desc.dag);
  const auto& inputs = ts.desc.dag->input_edges();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Token tok = ts.desc.data[i];
    tok.handle = 0;  // lives in the thread's data block
    if (ts.instance->push_token(inputs[i], std::move(tok)) != PushResult::Ok) {
      throw ContractViolation("land_thread: input FIFO full");
    }
  }
  resident_[*ts.cluster].push_back(t);
  ++progress_;
  request_scan(*ts.cluster);
}

void Runtime::on_thread_complete(ClusterId c, ThreadId t) {
  ThreadState& ts = threads_.at(t);
  auto& cl = machine_.cluster(c);
  if (ts.data_region) cl.section(SectionKind::ComputeData).free(ts.data_region);
  if (ts.fifo_region) cl.section(SectionKind::FifoLists).free(ts.fifo_region);
  if (ts.private_code) cl.section(SectionKind::TaskCodePool).free(ts.private_code);
  ts.data_region = ts.fifo_region = ts.private_code = 0;
  if (ts.uses_entry) {
    if (DeploymentEntry* e = table_.find(ts.desc.dag->id(), c)) {
      if (e->active_threads > 0) --e->active_threads;
      e->last_used = std::max(e->last_used, events_.now());
    }
    ts.uses_entry = false;
  }
  cl.active.erase(t);
  ts.desc.status = ThreadStatus::Done;
  ts.completed = events_.now();
  std::erase(resident_[c], t);
  ++metrics_.threads_completed;
  ++progress_;
  request_main_pass();
}

// ---------------------------------------------------------------- event plumbing

void Runtime::request_main_pass() {
  if (main_pending_) return;
  main_pending_ = true;
  EventTag tag{EventKind::SchedTick};
  events_.post(std::max(events_.now(), machine_.main_core().busy_until), tag, [this] { run_main_pass(); });
}

void Runtime::run_main_pass() {
  main_pending_ = false;
  const auto ready = static_cast<std::size_t>(std::count_if(
      tset_.begin(), tset_.end(), [&](ThreadId t) { return threads_.at(t).desc.status == ThreadStatus::Ready; }));
  if (ready == 0) return;
  ++metrics_.main_passes;
  machine_.main_core().reserve(events_.now(), ready * machine_.config().sched.thread_eval_cycles);

  const AddressSet aset = thread_schedule();
  for (const auto& [tid, addr] : aset) {
    EventTag tag;
    tag.thread = tid;
    machine_.main_transfer(addr.cluster, addr.transfer_bytes, tag, [this, tid = tid] { land_thread(tid); });
  }
  if (!tset_.empty()) ensure_tick();
}

void Runtime::request_scan(ClusterId c) {
  if (scan_pending_[c]) return;
  scan_pending_[c] = true;
  EventTag tag{EventKind::SchedTick};
  tag.cluster = c;
  events_.post(std::max(events_.now(), machine_.cluster_core(c).busy_until), tag, [this, c] {
    scan_pending_[c] = false;
    task_scan(c);
  });
}

void Runtime::ensure_tick() {
  if (tick_pending_) return;
  if (stuck_ && progress_ == progress_at_tick_) return;
  stuck_ = false;
  tick_pending_ = true;
  const Cycles period = std::max<Cycles>(1, machine_.config().sched.tick_cycles);
  const Cycles next = (events_.now() / period + 1) * period;
  events_.post(next, EventTag{EventKind::SchedTick}, [this] { on_tick(); });
}

void Runtime::on_tick() {
  tick_pending_ = false;
  // With nothing else in flight and no progress since the previous tick,
  // this tick's retries are the last chance; do not re-arm after them.
  stuck_ = events_.empty() && progress_ == progress_at_tick_;
  progress_at_tick_ = progress_;

  auto stalled = std::move(stalled_);
  stalled_.clear();
  for (auto [c, t] : stalled) service_interrupt(c, t);
  if (!tset_.empty()) request_main_pass();
  for (std::size_t c = 0; c < machine_.cluster_count(); ++c) {
    if (!resident_[c].empty()) request_scan(static_cast<ClusterId>(c));
  }
}

// ---------------------------------------------------------------- task level

std::optional<TileId> Runtime::select_tile(ClusterId c, Attribute attr) const {
  const auto& tiles = machine_.cluster(c).tiles;
  const TileState* best = nullptr;
  for (const auto& t : tiles) {
    if (t.run_state != RunState::Idle || !attribute_matches(attr, t.cls)) continue;
    if (!best) {
      best = &t;
      continue;
    }
    // Never-used tiles count as finished longest ago.
    const bool t_never = !t.last_finish.has_value();
    const bool b_never = !best->last_finish.has_value();
    if (t_never != b_never) {
      if (t_never) best = &t;
      continue;
    }
    if (!t_never && *t.last_finish < *best->last_finish) best = &t;
  }
  if (!best) return std::nullopt;
  return best->id;
}

Cycles Runtime::task_cycles(const TaskOutcome& o, const TileTiming& tile) const {
  double total = 0.0;
  for (const auto& w : o.work) {
    if (w.count == 0) continue;
    total += static_cast<double>(w.count) * w.scale * static_cast<double>(kernel_cycles(w.kind, w.size, tile, opts_.cost));
  }
  return std::max<Cycles>(1, static_cast<Cycles>(std::llround(total)));
}

std::vector<LoadIndication> Runtime::task_scan(ClusterId c) {
  std::vector<LoadIndication> out;
  auto& cl = machine_.cluster(c);
  ++metrics_.scans;

  std::size_t visited = 0;
  for (ThreadId tid : resident_[c]) visited += threads_.at(tid).desc.dag->tasks().size();
  if (visited == 0) return out;
  machine_.cluster_core(c).reserve(events_.now(), visited * machine_.config().sched.scan_node_cycles);

  bool blocked = false;
  for (ThreadId tid : resident_[c]) {
    if (blocked) break;
    ThreadState& ts = threads_.at(tid);
    DagInstance& inst = *ts.instance;
    const Dag& dag = inst.dag();
    for (std::size_t task : inst.ready_tasks()) {
      const TaskSpec& spec = dag.tasks()[task];
      const auto tile = select_tile(c, spec.attribute);
      if (!tile) continue;
      const TileState& tstate = cl.tiles[*tile];
      const std::size_t data_bytes = inst.input_bytes(task);
      if (spec.code_bytes + data_bytes > tstate.tspm_capacity) {
        ++metrics_.deployment_failures;
        continue;
      }
      const auto slot = cl.section(SectionKind::LoadIndication).alloc(opts_.load_indication_bytes);
      if (!slot) {
        ++metrics_.backpressure_events;
        ensure_tick();
        blocked = true;
        break;
      }

      auto inputs = inst.pop_inputs(task);
      inst.set_state(task, TaskState::Dispatched);
      InFlight f;
      f.thread = tid;
      f.task = task;
      f.indication = *slot;
      for (const auto& [e, tok] : inputs) {
        if (tok.handle) f.input_regions.push_back(tok.handle);
      }
      f.outcome = executor_.execute(dag, task, inputs);
      const Cycles cycles = task_cycles(f.outcome, tstate.timing);
      f.exec_index = exec_log_.size();
      exec_log_.push_back(ExecRecord{tid, task, c, *tile, tstate.cls, events_.now(), 0});

      EventTag tag;
      tag.thread = tid;
      tag.task = static_cast<std::uint32_t>(task);
      inflight_[c][*tile] = std::move(f);
      const TileId tile_id = *tile;
      machine_.deploy_to_tile(c, tile_id, spec.code_bytes, data_bytes, cycles, tag,
                              [this, c, tile_id] { on_tile_finished(c, tile_id); });
      inst.set_state(task, TaskState::Running);
      ++metrics_.dispatched_tasks;
      out.push_back(LoadIndication{tid, task, tile_id, *slot});
    }
  }
  return out;
}

void Runtime::on_tile_finished(ClusterId c, TileId t) {
  InFlight& f = *inflight_[c][t];
  auto& data = machine_.cluster(c).section(SectionKind::ComputeData);
  for (RegionId r : f.input_regions) data.free(r);
  f.input_regions.clear();

  std::uint32_t returned = static_cast<std::uint32_t>(f.outcome.outputs.size());
  if (f.outcome.return_value) ++returned;
  EventTag tag;
  tag.thread = f.thread;
  tag.task = static_cast<std::uint32_t>(f.task);
  machine_.complete_from_tile(c, t, returned, tag, [this, c, t] { service_interrupt(c, t); });
}

void Runtime::service_interrupt(ClusterId c, TileId t) {
  InFlight& f = *inflight_[c][t];
  ThreadState& ts = threads_.at(f.thread);
  DagInstance& inst = *ts.instance;
  const Dag& dag = inst.dag();
  const auto& outs = dag.out_edges(f.task);
  // A task without out edges may return one payload as thread output.
  f.sink = outs.empty() && f.outcome.outputs.size() == 1;
  if (f.outcome.outputs.size() != outs.size() && !f.sink) {
    throw ContractViolation("task '" + dag.tasks()[f.task].id + "' produced " +
                            std::to_string(f.outcome.outputs.size()) + " outputs for " + std::to_string(outs.size()) +
                            " out edges");
  }

  std::set<std::string> dismissed;
  if (auto rule = dag.rule_for_producer(f.task)) {
    const auto& r = dag.dismissal_rules()[*rule];
    const std::size_t k = f.outcome.return_value.value_or(r.max_count);
    if (k > r.max_count) throw std::invalid_argument("dismissal count exceeds group size");
    for (std::size_t i = k; i < r.group.size(); ++i) dismissed.insert(r.group[i]);
  }

  f.live_edges.clear();
  for (std::size_t i = 0; i < outs.size(); ++i) {
    if (!dismissed.count(dag.edges()[outs[i]].dst)) f.live_edges.push_back(i);
  }

  auto stall = [&] {
    for (RegionId r : f.output_regions) machine_.cluster(c).section(SectionKind::ComputeData).free(r);
    f.output_regions.clear();
    ++metrics_.backpressure_events;
    ++metrics_.retrieval_stalls;
    stalled_.emplace_back(c, t);
    ensure_tick();
  };

  if (f.sink) f.live_edges.push_back(0);
  for (std::size_t i : f.live_edges) {
    if (!f.sink && inst.fifo_full(outs[i])) return stall();
  }
  auto& data = machine_.cluster(c).section(SectionKind::ComputeData);
  std::size_t bytes = 0;
  for (std::size_t i : f.live_edges) {
    const std::size_t n = Token::footprint(f.outcome.outputs[i]);
    auto r = data.alloc(n);
    if (!r) return stall();
    f.output_regions.push_back(*r);
    bytes += n;
  }

  EventTag tag;
  tag.thread = f.thread;
  tag.task = static_cast<std::uint32_t>(f.task);
  machine_.retrieve_from_tile(c, t, bytes, tag, [this, c, t] { on_retrieved(c, t); });
}

void Runtime::on_retrieved(ClusterId c, TileId t) {
  InFlight f = std::move(*inflight_[c][t]);
  inflight_[c][t].reset();
  ThreadState& ts = threads_.at(f.thread);
  DagInstance& inst = *ts.instance;
  const Dag& dag = inst.dag();
  auto& cl = machine_.cluster(c);

  inst.set_state(f.task, TaskState::Done);
  if (auto rule = dag.rule_for_producer(f.task)) {
    const auto k = f.outcome.return_value.value_or(dag.dismissal_rules()[*rule].max_count);
    metrics_.dismissed_tasks += inst.apply_dismissal(*rule, k).size();
  }
  const auto& outs = dag.out_edges(f.task);
  for (std::size_t j = 0; j < f.live_edges.size(); ++j) {
    const std::size_t i = f.live_edges[j];
    Token tok{std::move(f.outcome.outputs[i]), f.output_regions[j]};
    if (f.sink) {
      ts.sink_outputs.push_back(std::move(tok));
      continue;
    }
    if (inst.push_token(outs[i], std::move(tok)) != PushResult::Ok) {
      throw ContractViolation("FIFO overflow after space check");
    }
  }
  cl.section(SectionKind::LoadIndication).free(f.indication);
  exec_log_[f.exec_index].end = events_.now();
  ++progress_;

  if (inst.is_complete()) {
    ThreadResult res;
    res.thread = f.thread;
    res.cluster = c;
    res.arrival = ts.desc.arrival_time;
    res.completed = events_.now();
    for (std::size_t e = 0; e < dag.edges().size(); ++e) {
      if (dag.edges()[e].dst != kExternal) continue;
      for (auto& tok : inst.drain(e)) {
        if (tok.handle) cl.section(SectionKind::ComputeData).free(tok.handle);
        tok.handle = 0;
        res.outputs.emplace_back(e, std::move(tok));
      }
    }
    for (auto& tok : ts.sink_outputs) {
      if (tok.handle) cl.section(SectionKind::ComputeData).free(tok.handle);
      tok.handle = 0;
      res.outputs.emplace_back(kSinkOutput, std::move(tok));
    }
    ts.sink_outputs.clear();
    on_thread_complete(c, f.thread);
    if (on_complete_) on_complete_(res);
  }
  request_scan(c);
}

}  // namespace wbpsim
