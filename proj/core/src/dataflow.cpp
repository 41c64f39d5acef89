#include "wbpsim/dataflow.hpp"

#include <algorithm>
#include <charconv>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace wbpsim {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_external(std::string_view id) { return id == kExternal; }

}  // namespace

std::string_view to_string(Attribute a) {
  switch (a) {
    case Attribute::Large: return "LARGE";
    case Attribute::Small: return "SMALL";
    case Attribute::Any: return "ANY";
  }
  return "?";
}

Attribute parse_attribute(std::string_view s) {
  if (s == "LARGE") return Attribute::Large;
  if (s == "SMALL") return Attribute::Small;
  if (s == "ANY") return Attribute::Any;
  throw std::invalid_argument("unknown attribute '" + std::string(s) + "'");
}

bool attribute_matches(Attribute a, TileClass c) noexcept {
  switch (a) {
    case Attribute::Any: return true;
    case Attribute::Large: return c == TileClass::Large;
    case Attribute::Small: return c == TileClass::Small;
  }
  return false;
}

std::string format_kernel(const KernelRef& k) {
  std::string s(to_string(k.kind));
  if (k.param >= 0) s += ":" + std::to_string(k.param);
  return s;
}

KernelRef parse_kernel(std::string_view s) {
  KernelRef k;
  const auto colon = s.find(':');
  k.kind = parse_kernel_kind(s.substr(0, colon));
  if (colon != std::string_view::npos) {
    const auto digits = s.substr(colon + 1);
    int v = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || v < 0) {
      throw std::invalid_argument("bad kernel parameter in '" + std::string(s) + "'");
    }
    k.param = v;
  }
  return k;
}

// ---------------------------------------------------------------- Dag

void Dag::require_mutable() const {
  if (finalized_) throw ContractViolation("dag: structure is frozen after finalize()");
}

std::size_t Dag::add_task(TaskSpec spec) {
  require_mutable();
  if (spec.id.empty() || is_external(spec.id) || spec.id.find_first_of(" \t\n") != std::string::npos) {
    throw std::invalid_argument("dag: invalid task id '" + spec.id + "'");
  }
  if (index_.count(spec.id)) throw std::invalid_argument("dag: duplicate task id '" + spec.id + "'");
  if (spec.code_bytes == 0) throw std::invalid_argument("dag: task '" + spec.id + "' has zero code bytes");
  const std::size_t idx = tasks_.size();
  index_.emplace(spec.id, idx);
  tasks_.push_back(std::move(spec));
  return idx;
}

std::size_t Dag::add_edge(std::string_view src, std::string_view dst, std::size_t capacity) {
  require_mutable();
  for (auto end : {src, dst}) {
    if (!is_external(end) && !index_.count(end)) {
      throw std::invalid_argument("dag: unknown edge endpoint '" + std::string(end) + "'");
    }
  }
  if (capacity == 0) throw std::invalid_argument("dag: FIFO capacity must be >= 1");
  edges_.push_back(Edge{std::string(src), std::string(dst), capacity});
  return edges_.size() - 1;
}

void Dag::add_dismissal(DismissalRule rule) {
  require_mutable();
  rules_.push_back(std::move(rule));
}

std::optional<std::size_t> Dag::index_of(std::string_view task_id) const {
  auto it = index_.find(task_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const TaskSpec& Dag::task(std::string_view task_id) const {
  auto idx = index_of(task_id);
  if (!idx) throw std::out_of_range("dag: no task '" + std::string(task_id) + "'");
  return tasks_[*idx];
}

std::size_t Dag::total_code_bytes() const {
  std::size_t s = 0;
  for (const auto& t : tasks_) s += t.code_bytes;
  return s;
}

std::vector<std::string> Dag::validate() const {
  std::vector<std::string> v;
  const std::size_t n = tasks_.size();
  if (n == 0) v.push_back("empty: DAG has no tasks");

  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indeg(n, 0), inputs(n, 0);
  for (const auto& e : edges_) {
    if (e.src == e.dst) {
      v.push_back("cyclic: self-loop on '" + e.src + "'");
      continue;
    }
    if (is_external(e.src) && is_external(e.dst)) {
      v.push_back("edge: EXTERNAL to EXTERNAL");
      continue;
    }
    if (!is_external(e.dst)) ++inputs[index_.at(e.dst)];
    if (!is_external(e.src) && !is_external(e.dst)) {
      succ[index_.at(e.src)].push_back(index_.at(e.dst));
      ++indeg[index_.at(e.dst)];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (inputs[i] == 0) v.push_back("no-input: task '" + tasks_[i].id + "' has no input edge");
  }

  // Kahn's algorithm; leftovers sit on a cycle.
  std::vector<std::size_t> deg = indeg;
  std::queue<std::size_t> q;
  for (std::size_t i = 0; i < n; ++i) {
    if (deg[i] == 0) q.push(i);
  }
  std::size_t seen = 0;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    ++seen;
    for (auto w : succ[u]) {
      if (--deg[w] == 0) q.push(w);
    }
  }
  if (seen != n && std::none_of(v.begin(), v.end(), [](const std::string& s) { return s.rfind("cyclic", 0) == 0; })) {
    v.push_back("cyclic: graph contains a cycle");
  }

  for (const auto& r : rules_) {
    auto p = index_of(r.producer);
    if (!p) {
      v.push_back("dismissal: unknown producer '" + r.producer + "'");
      continue;
    }
    if (r.group.size() != r.max_count) {
      v.push_back("dismissal: group of '" + r.producer + "' has " + std::to_string(r.group.size()) +
                  " members, max_count " + std::to_string(r.max_count));
    }
    std::set<std::string> uniq;
    std::vector<bool> reach(n, false);
    std::vector<std::size_t> stack{*p};
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto w : succ[u]) {
        if (!reach[w]) {
          reach[w] = true;
          stack.push_back(w);
        }
      }
    }
    for (const auto& m : r.group) {
      auto mi = index_of(m);
      if (!mi) {
        v.push_back("dismissal: unknown group member '" + m + "'");
      } else if (*mi == *p) {
        v.push_back("dismissal: producer '" + m + "' listed in its own group");
      } else if (!reach[*mi]) {
        v.push_back("dismissal: '" + m + "' is not reachable from '" + r.producer + "'");
      }
      if (!uniq.insert(m).second) v.push_back("dismissal: duplicate group member '" + m + "'");
    }
  }
  return v;
}

void Dag::finalize() {
  if (finalized_) return;
  if (auto v = validate(); !v.empty()) {
    std::string msg = "dag: invalid structure:";
    for (const auto& s : v) msg += "\n  " + s;
    throw std::invalid_argument(msg);
  }
  const std::size_t n = tasks_.size();
  in_.assign(n, {});
  out_.assign(n, {});
  ext_in_.clear();
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto& ed = edges_[e];
    if (is_external(ed.src)) {
      ext_in_.push_back(e);
    } else {
      out_[index_.at(ed.src)].push_back(e);
    }
    if (!is_external(ed.dst)) in_[index_.at(ed.dst)].push_back(e);
  }
  auto by = [&](auto key) {
    return [&, key](std::size_t a, std::size_t b) {
      const auto& ka = key(edges_[a]);
      const auto& kb = key(edges_[b]);
      return ka != kb ? ka < kb : a < b;
    };
  };
  auto dst_key = [](const Edge& e) -> const std::string& { return e.dst; };
  auto src_key = [](const Edge& e) -> const std::string& { return e.src; };
  for (auto& v : out_) std::sort(v.begin(), v.end(), by(dst_key));
  for (auto& v : in_) std::sort(v.begin(), v.end(), by(src_key));
  std::sort(ext_in_.begin(), ext_in_.end(), by(dst_key));

  // Topological order with ties broken by task id.
  std::vector<std::size_t> deg(n, 0);
  for (const auto& ed : edges_) {
    if (!is_external(ed.src) && !is_external(ed.dst)) ++deg[index_.at(ed.dst)];
  }
  auto cmp = [&](std::size_t a, std::size_t b) { return tasks_[a].id > tasks_[b].id; };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cmp)> pq(cmp);
  for (std::size_t i = 0; i < n; ++i) {
    if (deg[i] == 0) pq.push(i);
  }
  topo_.clear();
  while (!pq.empty()) {
    const auto u = pq.top();
    pq.pop();
    topo_.push_back(u);
    for (auto e : out_[u]) {
      if (is_external(edges_[e].dst)) continue;
      const auto w = index_.at(edges_[e].dst);
      if (--deg[w] == 0) pq.push(w);
    }
  }
  id_ = fnv1a(canonical_text());
  finalized_ = true;
}

std::string Dag::canonical_text() const {
  std::vector<std::string> lines;
  for (const auto& t : tasks_) {
    lines.push_back("task " + t.id + " " + format_kernel(t.kernel) + " " + std::string(to_string(t.attribute)) + " " +
                    std::to_string(t.code_bytes));
  }
  for (const auto& e : edges_) lines.push_back("edge " + e.src + " " + e.dst + " " + std::to_string(e.capacity));
  for (const auto& r : rules_) {
    std::string s = "dismiss " + r.producer + " " + std::to_string(r.max_count);
    for (const auto& m : r.group) s += " " + m;
    lines.push_back(std::move(s));
  }
  std::sort(lines.begin(), lines.end());
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  return text;
}

DagId Dag::id() const { return finalized_ ? id_ : fnv1a(canonical_text()); }

std::optional<std::size_t> Dag::rule_for_producer(std::size_t task) const {
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    if (rules_[r].producer == tasks_[task].id) return r;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- text format

Dag parse_dag(std::istream& in) {
  Dag dag;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ss(raw);
    std::vector<std::string> f;
    for (std::string w; ss >> w;) f.push_back(w);
    if (f.empty()) continue;
    try {
      if (f[0] == "task") {
        if (f.size() != 5) throw ParseError(line_no, "task expects: task <id> <kernel> <attr> <code_bytes>");
        dag.add_task(TaskSpec{f[1], parse_kernel(f[2]), parse_attribute(f[3]), std::stoull(f[4])});
      } else if (f[0] == "edge") {
        if (f.size() != 4) throw ParseError(line_no, "edge expects: edge <src> <dst> <cap>");
        dag.add_edge(f[1], f[2], std::stoull(f[3]));
      } else if (f[0] == "dismiss") {
        if (f.size() < 3) throw ParseError(line_no, "dismiss expects: dismiss <producer> <max_count> <id...>");
        DismissalRule r{f[1], std::vector<std::string>(f.begin() + 3, f.end()), std::stoull(f[2])};
        dag.add_dismissal(std::move(r));
      } else {
        throw ParseError(line_no, "unknown record '" + f[0] + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return dag;
}

void write_dag(std::ostream& out, const Dag& dag) {
  for (const auto& t : dag.tasks()) {
    out << "task " << t.id << ' ' << format_kernel(t.kernel) << ' ' << to_string(t.attribute) << ' ' << t.code_bytes
        << '\n';
  }
  for (const auto& e : dag.edges()) out << "edge " << e.src << ' ' << e.dst << ' ' << e.capacity << '\n';
  for (const auto& r : dag.dismissal_rules()) {
    out << "dismiss " << r.producer << ' ' << r.max_count;
    for (const auto& m : r.group) out << ' ' << m;
    out << '\n';
  }
}

// ---------------------------------------------------------------- tokens

std::size_t Token::footprint(const Payload& p) {
  constexpr std::size_t kHeader = 4;
  return kHeader + std::visit(
                       [](const auto& v) -> std::size_t {
                         using T = std::decay_t<decltype(v)>;
                         if constexpr (std::is_same_v<T, BitVec>) {
                           return (v.size() + 7) / 8;
                         } else if constexpr (std::is_same_v<T, CplxVec>) {
                           return v.size() * 4;
                         } else if constexpr (std::is_same_v<T, LlrVec>) {
                           return v.size() * 2;
                         } else {
                           return 4;
                         }
                       },
                       p);
}

std::size_t Token::byte_size() const { return footprint(payload); }

std::string_view to_string(TaskState s) {
  switch (s) {
    case TaskState::Waiting: return "WAITING";
    case TaskState::Ready: return "READY";
    case TaskState::Dispatched: return "DISPATCHED";
    case TaskState::Running: return "RUNNING";
    case TaskState::Done: return "DONE";
    case TaskState::Dismissed: return "DISMISSED";
  }
  return "?";
}

// ---------------------------------------------------------------- instance

DagInstance::DagInstance(DagPtr dag) : dag_(std::move(dag)) {
  if (!dag_ || !dag_->finalized()) throw ContractViolation("DagInstance requires a finalized DAG");
  state_.assign(dag_->tasks().size(), TaskState::Waiting);
  fifos_.resize(dag_->edges().size());
  pushes_.assign(dag_->edges().size(), 0);
  pops_.assign(dag_->edges().size(), 0);
}

void DagInstance::set_state(std::size_t task, TaskState s) {
  const TaskState cur = state_.at(task);
  bool ok = false;
  switch (s) {
    case TaskState::Waiting: ok = cur == TaskState::Ready; break;
    case TaskState::Ready: ok = cur == TaskState::Waiting; break;
    case TaskState::Dispatched: ok = cur == TaskState::Ready; break;
    case TaskState::Running: ok = cur == TaskState::Dispatched; break;
    case TaskState::Done: ok = cur == TaskState::Running; break;
    case TaskState::Dismissed: ok = cur == TaskState::Waiting || cur == TaskState::Ready; break;
  }
  if (!ok) {
    throw ContractViolation("task '" + dag_->tasks()[task].id + "': illegal transition " + std::string(to_string(cur)) +
                            " -> " + std::string(to_string(s)));
  }
  state_[task] = s;
}

bool DagInstance::fifo_full(std::size_t edge) const {
  return fifos_.at(edge).size() >= dag_->edges()[edge].capacity;
}

PushResult DagInstance::push_token(std::size_t edge, Token token) {
  if (fifo_full(edge)) return PushResult::Backpressure;
  fifos_[edge].push_back(std::move(token));
  ++pushes_[edge];
  return PushResult::Ok;
}

bool DagInstance::inputs_available(std::size_t task) const {
  for (auto e : dag_->in_edges(task)) {
    const auto& src = dag_->edges()[e].src;
    if (src != kExternal) {
      const auto si = *dag_->index_of(src);
      if (state_[si] == TaskState::Dismissed) continue;
    }
    if (fifos_[e].empty()) return false;
  }
  return true;
}

std::vector<std::size_t> DagInstance::ready_tasks() {
  std::vector<std::size_t> ready;
  for (auto t : dag_->topo_order()) {
    const auto s = state_[t];
    if ((s == TaskState::Waiting || s == TaskState::Ready) && inputs_available(t)) {
      state_[t] = TaskState::Ready;
      ready.push_back(t);
    }
  }
  return ready;
}

std::vector<std::pair<std::size_t, Token>> DagInstance::pop_inputs(std::size_t task) {
  if (state_.at(task) != TaskState::Ready || !inputs_available(task)) {
    throw ContractViolation("pop_inputs: task '" + dag_->tasks()[task].id + "' is not ready");
  }
  std::vector<std::pair<std::size_t, Token>> out;
  for (auto e : dag_->in_edges(task)) {
    auto& q = fifos_[e];
    if (q.empty()) continue;  // dismissed producer
    out.emplace_back(e, std::move(q.front()));
    q.pop_front();
    ++pops_[e];
  }
  return out;
}

std::size_t DagInstance::input_bytes(std::size_t task) const {
  std::size_t n = 0;
  for (auto e : dag_->in_edges(task)) {
    if (!fifos_[e].empty()) n += fifos_[e].front().byte_size();
  }
  return n;
}

std::vector<Token> DagInstance::drain(std::size_t edge) {
  auto& q = fifos_.at(edge);
  std::vector<Token> out(std::make_move_iterator(q.begin()), std::make_move_iterator(q.end()));
  pops_[edge] += q.size();
  q.clear();
  return out;
}

std::vector<std::string> DagInstance::apply_dismissal(std::size_t rule, std::size_t observed_count) {
  const auto& r = dag_->dismissal_rules().at(rule);
  if (observed_count > r.max_count) {
    throw std::invalid_argument("apply_dismissal: observed " + std::to_string(observed_count) + " exceeds max " +
                                std::to_string(r.max_count));
  }
  const auto producer = *dag_->index_of(r.producer);
  if (state_[producer] != TaskState::Done) throw ContractViolation("apply_dismissal: producer is not DONE");
  std::vector<std::string> dismissed;
  for (std::size_t i = observed_count; i < r.group.size(); ++i) {
    const auto t = *dag_->index_of(r.group[i]);
    set_state(t, TaskState::Dismissed);
    dismissed.push_back(r.group[i]);
  }
  return dismissed;
}

bool DagInstance::is_complete() const {
  return std::all_of(state_.begin(), state_.end(),
                     [](TaskState s) { return s == TaskState::Done || s == TaskState::Dismissed; });
}

std::size_t DagInstance::count(TaskState s) const {
  return static_cast<std::size_t>(std::count(state_.begin(), state_.end(), s));
}

}  // namespace wbpsim
