#pragma once

// Small DAGs and a pass-through executor for driving the runtime directly.

#include <memory>
#include <string>
#include <vector>

#include "wbpsim/dataflow.hpp"
#include "wbpsim/scheduler.hpp"

namespace testdag {

using namespace wbpsim;

// EXTERNAL -> t0 -> t1 -> ... -> EXTERNAL. `salt` changes the DAG id
// without changing its shape.
inline DagPtr chain(std::size_t n, std::size_t code_bytes = 1024, Attribute attr = Attribute::Any, int salt = 0) {
  auto g = std::make_shared<Dag>();
  for (std::size_t i = 0; i < n; ++i) {
    g->add_task(TaskSpec{"t" + std::to_string(i), KernelRef{KernelKind::Scramble, salt}, attr, code_bytes});
  }
  g->add_edge(kExternal, "t0");
  for (std::size_t i = 1; i < n; ++i) g->add_edge("t" + std::to_string(i - 1), "t" + std::to_string(i));
  g->add_edge("t" + std::to_string(n - 1), kExternal);
  g->finalize();
  return g;
}

// Two independent sources joined by a sink.
inline DagPtr two_sources(Attribute attr = Attribute::Any) {
  auto g = std::make_shared<Dag>();
  g->add_task(TaskSpec{"a", KernelRef{KernelKind::Scramble, -1}, attr, 512});
  g->add_task(TaskSpec{"b", KernelRef{KernelKind::Scramble, -1}, attr, 512});
  g->add_task(TaskSpec{"j", KernelRef{KernelKind::Aggregate, -1}, Attribute::Any, 512});
  g->add_edge(kExternal, "a");
  g->add_edge(kExternal, "b");
  g->add_edge("a", "j");
  g->add_edge("b", "j");
  g->add_edge("j", kExternal);
  g->finalize();
  return g;
}

inline ThreadDescriptor thread(ThreadId id, const DagPtr& dag, std::size_t bits = 256, Cycles arrival = 0) {
  ThreadDescriptor t;
  t.id = id;
  t.dag = dag;
  t.arrival_time = arrival;
  for (std::size_t i = 0; i < dag->input_edges().size(); ++i) t.data.push_back(Token{BitVec(bits, 1), 0});
  return t;
}

// Copies the first input to every out edge and charges one scramble of the
// input length.
class PassThrough : public TaskExecutor {
 public:
  TaskOutcome execute(const Dag& dag, std::size_t task,
                      const std::vector<std::pair<std::size_t, Token>>& inputs) override {
    TaskOutcome o;
    Payload p = inputs.empty() ? Payload{BitVec(8, 0)} : inputs.front().second.payload;
    std::size_t n = 8;
    if (const auto* b = std::get_if<BitVec>(&p)) n = std::max<std::size_t>(8, b->size());
    for (std::size_t i = 0; i < dag.out_edges(task).size(); ++i) o.outputs.push_back(p);
    o.work.push_back(WorkItem{KernelKind::Scramble, n, 1, 1.0});
    return o;
  }
};

}  // namespace testdag
