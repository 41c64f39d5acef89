#include <gtest/gtest.h>

#include "wbpsim/machine.hpp"

using namespace wbpsim;

namespace {

MachineConfig one_tile(bool strict = true) {
  MachineConfig cfg;
  cfg.strict = strict;
  return cfg;
}

EventTag ids() { return EventTag{}; }

}  // namespace

TEST(SpmSection, AllocFreeRestoresCapacity) {
  SpmSection s(0, 1024);
  const auto a = s.alloc(100);
  ASSERT_TRUE(a);
  EXPECT_EQ(s.used(), 100u);
  s.free(*a);
  EXPECT_EQ(s.free_bytes(), 1024u);
  EXPECT_EQ(s.largest_hole(), 1024u);
  EXPECT_THROW(s.free(*a), ContractViolation);
  EXPECT_THROW(s.alloc(0), std::invalid_argument);
}

TEST(SpmSection, ExactFillThenFail) {
  SpmSection s(0, 300);
  EXPECT_TRUE(s.alloc(100));
  EXPECT_TRUE(s.alloc(200));
  EXPECT_FALSE(s.alloc(1));
  EXPECT_FALSE(s.can_fit(1));
  EXPECT_TRUE(s.verify());
}

TEST(SpmSection, FirstFitReusesMiddleHole) {
  SpmSection s(4096, 1000);
  const auto a = *s.alloc(100), b = *s.alloc(100), c = *s.alloc(100);
  EXPECT_EQ(s.address(a), 4096u);
  EXPECT_EQ(s.address(b), 4196u);
  EXPECT_EQ(s.address(c), 4296u);
  s.free(b);
  const auto d = *s.alloc(100);
  EXPECT_EQ(s.region(d).offset, 100u);
  s.free(d);
  // A smaller request still lands in the first hole.
  const auto e = *s.alloc(40);
  EXPECT_EQ(s.region(e).offset, 100u);
  EXPECT_TRUE(s.verify());
}

TEST(SpmSection, FreeCoalesces) {
  SpmSection s(0, 300);
  const auto a = *s.alloc(100), b = *s.alloc(100), c = *s.alloc(100);
  s.free(a);
  s.free(c);
  EXPECT_EQ(s.largest_hole(), 100u);
  s.free(b);
  EXPECT_EQ(s.largest_hole(), 300u);
  EXPECT_TRUE(s.alloc(300));
  EXPECT_EQ(s.high_water(), 300u);
}

TEST(MachineConfig, Validation) {
  MachineConfig cfg;
  cfg.clusters = 0;
  try {
    cfg.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("clusters"), std::string::npos);
  }
  cfg.clusters = 2;
  cfg.hierarchical = false;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.hierarchical = true;
  cfg.tile_mix = {TileClass::Large, TileClass::Small, TileClass::Small};
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.l_tiles(), 1u);
  EXPECT_EQ(cfg.s_tiles(), 2u);
}

TEST(Machine, EnginesPerCluster) {
  EventQueue q;
  MachineConfig cfg;
  cfg.clusters = 3;
  Machine m(cfg, q);
  EXPECT_EQ(m.dma_engines().size(), 4u);
  EXPECT_EQ(m.cores().size(), 4u);
  EXPECT_NE(&m.cluster_dma(1), &m.main_dma());

  EventQueue q2;
  MachineConfig flat;
  flat.hierarchical = false;
  Machine f(flat, q2);
  EXPECT_EQ(&f.cluster_dma(0), &f.main_dma());
  EXPECT_EQ(&f.cluster_core(0), &f.main_core());
}

TEST(Machine, DeployLatency) {
  for (auto [bytes, want] : {std::pair<std::size_t, Cycles>{1000, 95}, {0, 32}, {16, 33}}) {
    EventQueue q;
    Machine m(one_tile(), q);
    Cycles finished = 0;
    ASSERT_TRUE(m.deploy_to_tile(0, 0, bytes / 2, bytes - bytes / 2, 0, ids(), [&] { finished = q.now(); }));
    EXPECT_EQ(m.cluster(0).tiles[0].run_state, RunState::Loading);
    EXPECT_EQ(m.cluster(0).tiles[0].port, PortDirection::Bus);
    q.run();
    EXPECT_EQ(finished, want) << bytes << " B";
    const auto& t = m.cluster(0).tiles[0];
    EXPECT_EQ(t.run_state, RunState::Running);
    EXPECT_EQ(t.port, PortDirection::Core);
    EXPECT_FALSE(t.reset_active);
    EXPECT_EQ(m.monitor().total(), 0u);
  }
}

TEST(Machine, DeployRunsForKernelCycles) {
  EventQueue q;
  Machine m(one_tile(), q);
  Cycles finished = 0;
  m.deploy_to_tile(0, 0, 600, 400, 500, ids(), [&] { finished = q.now(); });
  q.run();
  EXPECT_EQ(finished, 595u);
}

TEST(Machine, OversizedDeployFails) {
  EventQueue q;
  Machine m(one_tile(), q);
  EXPECT_FALSE(m.deploy_to_tile(0, 0, 64 * 1024, 1, 10, ids(), [] {}));
  EXPECT_EQ(m.cluster(0).tiles[0].run_state, RunState::Idle);
  EXPECT_TRUE(q.empty());
  EXPECT_TRUE(m.deploy_to_tile(0, 0, 10, 10, 10, ids(), [] {}));
  EXPECT_THROW(m.deploy_to_tile(0, 0, 10, 10, 10, ids(), [] {}), ContractViolation);
}

TEST(Machine, CompleteAndRetrieve) {
  EventQueue q;
  Machine m(one_tile(), q);
  Cycles finished = 0, interrupted = 0, retrieved = 0;
  m.deploy_to_tile(0, 0, 100, 100, 200, ids(), [&] {
    finished = q.now();
    m.complete_from_tile(0, 0, 1, ids(), [&] {
      interrupted = q.now();
      EXPECT_EQ(m.cluster(0).tiles[0].return_value_count, 1u);
      EXPECT_EQ(m.cluster(0).tiles[0].port, PortDirection::Bus);
      EXPECT_TRUE(m.cluster(0).tiles[0].reset_active);
      m.retrieve_from_tile(0, 0, 160, ids(), [&] { retrieved = q.now(); });
    });
  });
  q.run();
  EXPECT_EQ(interrupted, finished + 4);
  // CSR to program the DMA, then setup + 160/16.
  EXPECT_EQ(retrieved, interrupted + 4 + 30);
  const auto& t = m.cluster(0).tiles[0];
  EXPECT_EQ(t.run_state, RunState::Idle);
  EXPECT_EQ(t.busy_cycles, 200u);
  EXPECT_EQ(t.tasks_run, 1u);
  EXPECT_EQ(m.monitor().total(), 0u);
  EXPECT_THROW(m.complete_from_tile(0, 0, 0, ids(), [] {}), ContractViolation);
}

TEST(Machine, PortFlipWhileRunning) {
  EventQueue q;
  Machine strict(one_tile(true), q);
  strict.deploy_to_tile(0, 0, 10, 10, 1000, ids(), [] {});
  q.run_until(100);
  ASSERT_EQ(strict.cluster(0).tiles[0].run_state, RunState::Running);
  EXPECT_THROW(strict.set_port_direction(0, 0, PortDirection::Bus), ProtocolViolation);

  EventQueue q2;
  Machine lenient(one_tile(false), q2);
  lenient.deploy_to_tile(0, 0, 10, 10, 1000, ids(), [] {});
  q2.run_until(100);
  EXPECT_EQ(lenient.set_port_direction(0, 0, PortDirection::Bus), 4u);
  EXPECT_EQ(lenient.monitor().port_violations(), 1u);
  EXPECT_EQ(lenient.cluster(0).tiles[0].port, PortDirection::Core);
}

TEST(Machine, PortFlipWhileIdle) {
  EventQueue q;
  Machine m(one_tile(), q);
  EXPECT_EQ(m.set_port_direction(0, 0, PortDirection::Core), 4u);
  EXPECT_EQ(m.set_port_direction(0, 0, PortDirection::Bus), 4u);
  EXPECT_EQ(m.cluster(0).tiles[0].port, PortDirection::Bus);
}

TEST(Machine, InjectedViolationIsCaught) {
  EventQueue q;
  Machine m(one_tile(true), q);
  m.inject_violation();
  m.deploy_to_tile(0, 0, 10, 10, 10, ids(), [] {});
  EXPECT_THROW(q.run(), ProtocolViolation);

  EventQueue q2;
  Machine l(one_tile(false), q2);
  l.inject_violation();
  l.deploy_to_tile(0, 0, 10, 10, 10, ids(), [] {});
  q2.run();
  EXPECT_GE(l.monitor().port_violations(), 1u);
}

TEST(Machine, DmaSerialization) {
  EventQueue q;
  Machine m(one_tile(), q);
  auto& sec = m.cluster(0).section(SectionKind::ComputeData);
  const auto src = *sec.alloc(160), dst = *sec.alloc(160);
  q.run_until(1000);
  std::vector<Cycles> done;
  for (int i = 0; i < 3; ++i) {
    m.dma_transfer(0, SectionKind::ComputeData, src, SectionKind::ComputeData, dst, 160, ids(),
                   [&] { done.push_back(q.now()); });
  }
  q.run();
  EXPECT_EQ(done, (std::vector<Cycles>{1030, 1060, 1090}));
  EXPECT_EQ(m.cluster_dma(0).transfers, 3u);

  EXPECT_THROW(m.dma_transfer(0, SectionKind::ComputeData, 999, SectionKind::ComputeData, dst, 1, ids(), [] {}),
               ContractViolation);
  Cycles idle_done = 0;
  m.dma_transfer(0, SectionKind::ComputeData, src, SectionKind::ComputeData, dst, 0, ids(),
                 [&] { idle_done = q.now(); });
  q.run();
  EXPECT_EQ(idle_done, 1090u + 20u);
}

TEST(Machine, MainTransferUsesOneCsr) {
  EventQueue q;
  MachineConfig cfg;
  cfg.clusters = 2;
  Machine m(cfg, q);
  const Cycles t = m.main_transfer(1, 1000, ids(), [] {});
  EXPECT_EQ(t, 4u + 83u);
  EXPECT_EQ(m.main_dma().bytes, 1000u);
  EXPECT_EQ(m.cluster_dma(1).bytes, 0u);
  q.run();
}
