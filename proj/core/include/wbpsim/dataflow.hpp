#pragma once

#include <deque>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wbpsim/cost_model.hpp"
#include "wbpsim/types.hpp"

namespace wbpsim {

/// Tile-class preference attached to a task.
enum class Attribute : std::uint8_t { Large, Small, Any };

std::string_view to_string(Attribute a);
Attribute parse_attribute(std::string_view s);
bool attribute_matches(Attribute a, TileClass c) noexcept;

/// Pseudo task id for thread input/output edges.
inline constexpr std::string_view kExternal = "EXTERNAL";

/// A kernel plus its static parameter (user index for per-user tasks,
/// decoder slot for channel decoders; -1 when unused).
struct KernelRef {
  KernelKind kind = KernelKind::Fft;
  int param = -1;

  friend bool operator==(const KernelRef&, const KernelRef&) = default;
};

std::string format_kernel(const KernelRef& k);
KernelRef parse_kernel(std::string_view s);

struct TaskSpec {
  std::string id;
  KernelRef kernel;
  Attribute attribute = Attribute::Any;
  std::size_t code_bytes = 1024;
};

inline constexpr std::size_t kDefaultFifoCapacity = 4;

struct Edge {
  std::string src;
  std::string dst;
  std::size_t capacity = kDefaultFifoCapacity;
};

struct DismissalRule {
  std::string producer;
  std::vector<std::string> group;
  std::size_t max_count = 0;
};

/// Worst-case task graph. Built with add_* calls, then frozen by finalize(),
/// after which it is immutable and shared between instances.
class Dag {
 public:
  /// Throws std::invalid_argument on a duplicate or reserved id, or
  /// code_bytes == 0.
  std::size_t add_task(TaskSpec spec);
  /// Endpoints must exist or be EXTERNAL. Structural checks (self loops,
  /// cycles) are left to validate().
  std::size_t add_edge(std::string_view src, std::string_view dst, std::size_t capacity = kDefaultFifoCapacity);
  void add_dismissal(DismissalRule rule);

  /// Violations found: cycles, tasks without inputs, bad dismissal groups.
  /// Never throws.
  std::vector<std::string> validate() const;

  /// Validates and builds the adjacency caches. Throws std::invalid_argument
  /// listing the violations.
  void finalize();
  bool finalized() const noexcept { return finalized_; }

  /// FNV-1a hash of the canonical (sorted) structure; equal for the same
  /// structure built in a different insertion order.
  DagId id() const;

  const std::vector<TaskSpec>& tasks() const noexcept { return tasks_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<DismissalRule>& dismissal_rules() const noexcept { return rules_; }
  std::optional<std::size_t> index_of(std::string_view task_id) const;
  const TaskSpec& task(std::string_view task_id) const;
  std::size_t total_code_bytes() const;

  // Available after finalize(). Orders are canonical: ties broken by id.
  const std::vector<std::size_t>& topo_order() const { return topo_; }
  const std::vector<std::size_t>& in_edges(std::size_t task) const { return in_[task]; }
  const std::vector<std::size_t>& out_edges(std::size_t task) const { return out_[task]; }
  /// Edges from EXTERNAL, ordered by destination id.
  const std::vector<std::size_t>& input_edges() const { return ext_in_; }
  /// Rule index for which `task` is the producer, if any.
  std::optional<std::size_t> rule_for_producer(std::size_t task) const;

 private:
  void require_mutable() const;
  std::string canonical_text() const;

  std::vector<TaskSpec> tasks_;
  std::vector<Edge> edges_;
  std::vector<DismissalRule> rules_;
  std::map<std::string, std::size_t, std::less<>> index_;

  bool finalized_ = false;
  std::vector<std::size_t> topo_;
  std::vector<std::vector<std::size_t>> in_, out_;
  std::vector<std::size_t> ext_in_;
  DagId id_ = 0;
};

using DagPtr = std::shared_ptr<const Dag>;

/// Plain-text DAG description, one record per line:
///   task <id> <kernel>[:param] <LARGE|SMALL|ANY> <code_bytes>
///   edge <src> <dst> <capacity>
///   dismiss <producer> <max_count> <id...>
/// '#' starts a comment.
Dag parse_dag(std::istream& in);
void write_dag(std::ostream& out, const Dag& dag);

struct Scalar {
  std::int64_t value = 0;
  friend bool operator==(const Scalar&, const Scalar&) = default;
};

using Payload = std::variant<BitVec, CplxVec, LlrVec, Scalar>;

/// A FIFO entry. SPM footprint: 4-byte length header plus the payload at
/// its on-chip width (bits packed 8 per byte, 16-bit I/Q samples, 16-bit
/// LLRs, 32-bit scalars).
struct Token {
  Payload payload;
  /// Opaque slot used by the machine to track where the data lives.
  std::uint32_t handle = 0;

  std::size_t byte_size() const;
  static std::size_t footprint(const Payload& p);
};

enum class TaskState : std::uint8_t { Waiting, Ready, Dispatched, Running, Done, Dismissed };
std::string_view to_string(TaskState s);

enum class PushResult : std::uint8_t { Ok, Backpressure };

/// Runtime state of one thread's DAG: task states and one FIFO per edge.
class DagInstance {
 public:
  explicit DagInstance(DagPtr dag);

  const Dag& dag() const noexcept { return *dag_; }
  const DagPtr& dag_ptr() const noexcept { return dag_; }

  TaskState state(std::size_t task) const { return state_.at(task); }
  /// Allowed: Waiting->Ready->Dispatched->Running->Done, Ready->Waiting
  /// (returned to the pool), and Waiting/Ready->Dismissed. Anything else
  /// throws ContractViolation.
  void set_state(std::size_t task, TaskState s);

  PushResult push_token(std::size_t edge, Token token);
  std::size_t fifo_length(std::size_t edge) const { return fifos_.at(edge).size(); }
  bool fifo_full(std::size_t edge) const;

  /// Tasks that are Waiting or Ready whose every input FIFO holds a token;
  /// inputs produced by dismissed tasks count as satisfied. Promotes the
  /// returned tasks to Ready. Result is in topological order.
  std::vector<std::size_t> ready_tasks();
  bool inputs_available(std::size_t task) const;

  /// Removes exactly one token per live input edge, in canonical edge order.
  /// Throws ContractViolation unless the task is Ready.
  std::vector<std::pair<std::size_t, Token>> pop_inputs(std::size_t task);
  /// Bytes of the tokens pop_inputs() would return.
  std::size_t input_bytes(std::size_t task) const;
  /// Removes every token queued on an edge (thread outputs).
  std::vector<Token> drain(std::size_t edge);

  /// Dismisses the last (max_count - k) members of the rule's group.
  /// Throws std::invalid_argument if k > max_count and ContractViolation if
  /// the producer is not Done or a member was already dispatched.
  std::vector<std::string> apply_dismissal(std::size_t rule, std::size_t observed_count);

  bool is_complete() const;

  std::size_t pushes(std::size_t edge) const { return pushes_.at(edge); }
  std::size_t pops(std::size_t edge) const { return pops_.at(edge); }
  std::size_t count(TaskState s) const;

 private:
  DagPtr dag_;
  std::vector<TaskState> state_;
  std::vector<std::deque<Token>> fifos_;
  std::vector<std::size_t> pushes_, pops_;
};

}  // namespace wbpsim
