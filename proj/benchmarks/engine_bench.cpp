#include <benchmark/benchmark.h>

#include "wbpsim/event.hpp"
#include "wbpsim/workload.hpp"

using namespace wbpsim;

static void BM_EventQueue(benchmark::State& state) {
  const auto n = static_cast<Cycles>(state.range(0));
  for (auto _ : state) {
    EventQueue q;
    EventTag tag;
    tag.kind = EventKind::SchedTick;
    for (Cycles t = 0; t < n; ++t) q.post((t * 7919) % n, tag, [] {});
    q.run();
    benchmark::DoNotOptimize(q.digest());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EventQueue)->Arg(1 << 10)->Arg(1 << 16);

// Two slots (one TX, one RX) of a 5-user link on a 2-cluster machine.
static void BM_SmallExperiment(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.machine.clusters = 2;
  cfg.machine.tile_mix = {TileClass::Large, TileClass::Large, TileClass::Small, TileClass::Small};
  cfg.link.users_per_slot = 5;
  cfg.tdd.slots = parse_pattern("D,U");
  cfg.slots = 2;
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(cfg).digest);
}
BENCHMARK(BM_SmallExperiment)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
