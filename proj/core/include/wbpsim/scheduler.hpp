#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wbpsim/cost_model.hpp"
#include "wbpsim/dataflow.hpp"
#include "wbpsim/machine.hpp"

namespace wbpsim {

enum class ThreadStatus : std::uint8_t { Ready, Registered, Running, Done };
std::string_view to_string(ThreadStatus s);

struct ThreadDescriptor {
  ThreadId id = 0;
  DagPtr dag;
  /// One token per DAG input edge, in Dag::input_edges() order.
  std::vector<Token> data;
  ThreadStatus status = ThreadStatus::Ready;
  Cycles arrival_time = 0;

  std::size_t data_bytes() const;
};

// ---------------------------------------------------------------- payloads

inline constexpr std::size_t kPackHeaderBytes = 32;

struct PackedPayload {
  std::vector<std::uint8_t> bytes;  ///< header + DAG description + tokens
  std::size_t code_bytes = 0;       ///< header + task code, lands in TASK_CODE_POOL
  std::size_t data_bytes = 0;       ///< tokens, land in COMPUTE_DATA
  /// Bytes moved by the DMA: header + total code bytes + token bytes.
  std::size_t accounted_bytes() const { return code_bytes + data_bytes; }
};

PackedPayload mem_pack(std::span<const Token> data, const Dag& dag);

struct UnpackedPayload {
  DagId dag_id = 0;
  Dag dag;
  std::vector<Token> data;
};

/// Throws std::invalid_argument on a malformed payload.
UnpackedPayload mem_unpack(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------- residency

struct DeploymentEntry {
  DagId dag_id = 0;
  ClusterId cluster = 0;
  Cycles last_used = 0;
  RegionId code_region = 0;
  std::size_t code_bytes = 0;
  std::size_t active_threads = 0;
};

/// dag_id -> cluster residency of DAG code, at most one entry per
/// (dag_id, cluster).
class DeploymentTable {
 public:
  DeploymentEntry* find(DagId dag, ClusterId c);
  const DeploymentEntry* find(DagId dag, ClusterId c) const;
  DeploymentEntry& add(const DeploymentEntry& e);
  void erase(DagId dag, ClusterId c);
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  /// Ordered by (cluster, dag_id).
  std::vector<const DeploymentEntry*> entries() const;
  std::vector<DeploymentEntry*> entries();

 private:
  std::map<std::pair<ClusterId, DagId>, DeploymentEntry> entries_;
};

enum class Decision : std::uint8_t { Hit, Admit, Evict, Wait };
std::string_view to_string(Decision d);

/// One step of the thread-level pass, kept for conformance checks.
struct DecisionRecord {
  ThreadId thread = 0;
  Decision decision = Decision::Wait;
  std::optional<ClusterId> cluster;
  std::size_t dag_bytes = 0;      ///< DAG bytes shipped by this decision
  std::optional<DagId> evicted;   ///< DAG dropped by an EVICT

  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};
std::string to_string(const DecisionRecord& r);

struct Address {
  ClusterId cluster = 0;
  std::size_t data_address = 0;
  std::size_t transfer_bytes = 0;
  bool dag_shipped = false;
};
using AddressSet = std::map<ThreadId, Address>;

struct LoadIndication {
  ThreadId thread = 0;
  std::size_t task = 0;
  TileId tile = 0;
  RegionId region = 0;  ///< LOAD_INDICATION slot
};

// ---------------------------------------------------------------- execution

/// A kernel invocation charged to the tile running a task.
struct WorkItem {
  KernelKind kind = KernelKind::Fft;
  std::size_t size = 1;
  std::size_t count = 1;
  double scale = 1.0;
};

struct TaskOutcome {
  /// One payload per out edge in Dag::out_edges() order. Entries for edges
  /// into dismissed tasks are dropped.
  std::vector<Payload> outputs;
  /// Scalar return value; drives dismissal when the task is a producer.
  std::optional<std::size_t> return_value;
  std::vector<WorkItem> work;
};

/// Functional behaviour of tasks, supplied by the workload.
class TaskExecutor {
 public:
  virtual ~TaskExecutor() = default;
  virtual TaskOutcome execute(const Dag& dag, std::size_t task,
                              const std::vector<std::pair<std::size_t, Token>>& inputs) = 0;
};

struct SchedulerFlags {
  bool multithreading = true;
  bool lazy_deletion = true;
  /// Literal thread-level control flow: the thread-manager path skips registration.
  bool strict_algorithm = false;
};

struct SchedulerMetrics {
  std::uint64_t dag_transfers = 0;
  std::uint64_t data_transfers = 0;
  std::uint64_t dag_bytes = 0;
  std::uint64_t data_bytes = 0;
  std::uint64_t evictions = 0;
  std::uint64_t residency_hits = 0;
  std::uint64_t backpressure_events = 0;
  std::uint64_t retrieval_stalls = 0;
  std::uint64_t deployment_failures = 0;
  std::uint64_t dispatched_tasks = 0;
  std::uint64_t dismissed_tasks = 0;
  std::uint64_t threads_completed = 0;
  std::uint64_t scans = 0;
  std::uint64_t main_passes = 0;
};

struct ExecRecord {
  ThreadId thread = 0;
  std::size_t task = 0;
  ClusterId cluster = 0;
  TileId tile = 0;
  TileClass tile_class = TileClass::Large;
  Cycles start = 0;  ///< dispatch decision
  Cycles end = 0;    ///< results retrieved
};

/// Edge index used in ThreadResult::outputs for the result of a task that
/// has no out edges.
inline constexpr std::size_t kSinkOutput = static_cast<std::size_t>(-1);

struct ThreadResult {
  ThreadId thread = 0;
  ClusterId cluster = 0;
  Cycles arrival = 0;
  Cycles completed = 0;
  /// Tokens delivered on edges into EXTERNAL, by edge index, then sink
  /// task results under kSinkOutput.
  std::vector<std::pair<std::size_t, Token>> outputs;
};

/// Both scheduling levels on top of a Machine: residency/admit/evict at thread level and
/// the CS-SPM section scan at task level.
class Runtime {
 public:
  struct Options {
    SchedulerFlags flags{};
    CostParams cost{};
    /// COMPUTE_DATA headroom demanded beyond a thread's input data before
    /// the thread manager admits it.
    std::size_t scratch_reserve_bytes = 16 * 1024;
    std::size_t fifo_bytes_per_edge = 16;
    std::size_t load_indication_bytes = 16;
  };

  Runtime(Machine& machine, TaskExecutor& executor, Options opts);

  /// Schedules a THREAD_ARRIVAL at t.arrival_time.
  void submit(ThreadDescriptor t);
  /// Runs to quiescence. Throws std::runtime_error if threads remain.
  Cycles run();

  void set_completion_callback(std::function<void(const ThreadResult&)> cb) { on_complete_ = std::move(cb); }

  // Thread-level operations. thread_schedule() works on the READY threads
  // in arrival order; the others are exposed for tests.
  AddressSet thread_schedule();
  std::optional<ClusterId> code_deployed(ThreadId t) const;
  bool thread_manager_query(ClusterId c, ThreadId t) const;
  /// Evicts the least recently used idle DAG on a cluster with a free
  /// thread slot; ties go to the lowest cluster id. With an empty table it
  /// evicts nothing and returns the lowest cluster with a free slot and
  /// `code_bytes` of free code pool.
  std::optional<ClusterId> get_cluster_lru(std::size_t code_bytes = 1);
  /// Places the payload (code only when `with_dag`) plus FIFO lists on the
  /// cluster; all or nothing.
  std::optional<Address> mem_alloc(ClusterId c, ThreadId t, bool with_dag);
  /// Thread-end bookkeeping. Normally invoked when the DAG instance
  /// completes; tests call it to script scenarios.
  void on_thread_complete(ClusterId c, ThreadId t);
  /// Moves an admitted thread onto its cluster as if its DMA had finished.
  void land_thread(ThreadId t);

  // Task-level operations.
  std::vector<LoadIndication> task_scan(ClusterId c);
  std::optional<TileId> select_tile(ClusterId c, Attribute attr) const;

  void add_ready_thread(ThreadDescriptor t);  ///< enqueue without an arrival event

  const DeploymentTable& table() const noexcept { return table_; }
  const std::vector<DecisionRecord>& decisions() const noexcept { return decisions_; }
  const SchedulerMetrics& metrics() const noexcept { return metrics_; }
  const std::vector<ExecRecord>& executions() const noexcept { return exec_log_; }
  const ThreadDescriptor& thread(ThreadId t) const { return threads_.at(t).desc; }
  std::size_t thread_count() const noexcept { return threads_.size(); }
  std::size_t incomplete_threads() const;
  const Options& options() const noexcept { return opts_; }
  Machine& machine() noexcept { return machine_; }
  /// Highest number of concurrently admitted threads seen per cluster.
  const std::vector<std::size_t>& peak_threads() const noexcept { return peak_threads_; }

 private:
  struct InFlight {
    ThreadId thread = 0;
    std::size_t task = 0;
    TaskOutcome outcome;
    std::vector<RegionId> input_regions;
    RegionId indication = 0;
    std::vector<std::size_t> live_edges;      ///< out edges receiving tokens
    std::vector<RegionId> output_regions;
    std::size_t exec_index = 0;
    bool sink = false;
  };

  struct ThreadState {
    ThreadDescriptor desc;
    std::optional<ClusterId> cluster;
    std::unique_ptr<DagInstance> instance;
    RegionId data_region = 0;
    RegionId fifo_region = 0;
    RegionId private_code = 0;  ///< code not tracked by the table
    bool uses_entry = false;
    Cycles completed = 0;
    std::vector<Token> sink_outputs;
  };

  std::size_t effective_max_threads(ClusterId c) const;
  bool slot_free(ClusterId c) const;
  std::size_t code_footprint(const Dag& dag) const;
  std::size_t fifo_footprint(const Dag& dag) const;
  void admit(ThreadState& ts, const Address& a, Decision d, std::optional<DagId> evicted, AddressSet& aset);

  void on_arrival(ThreadId t);
  void request_main_pass();
  void run_main_pass();
  void request_scan(ClusterId c);
  void run_scan(ClusterId c);
  void ensure_tick();
  void on_tick();
  void on_tile_finished(ClusterId c, TileId t);
  void service_interrupt(ClusterId c, TileId t);
  void on_retrieved(ClusterId c, TileId t);
  Cycles task_cycles(const TaskOutcome& o, const TileTiming& tile) const;

  Machine& machine_;
  EventQueue& events_;
  TaskExecutor& executor_;
  Options opts_;

  std::map<ThreadId, ThreadState> threads_;
  std::vector<ThreadId> tset_;  ///< arrival order
  std::vector<std::vector<ThreadId>> resident_;  ///< per cluster, landing order
  std::vector<std::vector<std::optional<InFlight>>> inflight_;  ///< [cluster][tile]
  std::vector<std::pair<ClusterId, TileId>> stalled_;
  std::vector<bool> scan_pending_;
  std::vector<std::size_t> peak_threads_;
  bool main_pending_ = false;
  bool tick_pending_ = false;
  std::uint64_t progress_ = 0;
  std::uint64_t progress_at_tick_ = 0;
  bool stuck_ = false;
  std::optional<DagId> last_evicted_;

  DeploymentTable table_;
  std::vector<DecisionRecord> decisions_;
  SchedulerMetrics metrics_;
  std::vector<ExecRecord> exec_log_;
  std::function<void(const ThreadResult&)> on_complete_;
};

}  // namespace wbpsim
