#include <gtest/gtest.h>

#include <sstream>

#include "wbpsim/event.hpp"

using namespace wbpsim;

namespace {

EventTag tag(EventKind k, std::uint32_t thread = kNoId) {
  EventTag t;
  t.kind = k;
  t.thread = thread;
  return t;
}

}  // namespace

TEST(EventQueue, SameTimeInPostOrder) {
  EventQueue q;
  std::vector<int> order;
  q.post(10, tag(EventKind::SchedTick), [&] { order.push_back(1); });
  q.post(10, tag(EventKind::SchedTick), [&] { order.push_back(2); });
  q.post(5, tag(EventKind::SchedTick), [&] { order.push_back(0); });
  q.run();
  EXPECT_EQ(order, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(q.now(), 10u);
}

TEST(EventQueue, RunUntilEmptyAdvancesClock) {
  EventQueue q;
  q.run_until(1234);
  EXPECT_EQ(q.now(), 1234u);
  EXPECT_THROW(q.post(1000, tag(EventKind::SchedTick), [] {}), ContractViolation);
}

TEST(EventQueue, RunUntilIsInclusive) {
  EventQueue q;
  int n = 0;
  q.post(100, tag(EventKind::SchedTick), [&] { ++n; });
  q.post(101, tag(EventKind::SchedTick), [&] { ++n; });
  q.run_until(100);
  EXPECT_EQ(n, 1);
  EXPECT_EQ(q.pending(), 1u);
  EXPECT_TRUE(q.step());
  EXPECT_FALSE(q.step());
  EXPECT_EQ(n, 2);
}

// Hand-ordered scenario: handlers post at the current time and in the future.
TEST(EventQueue, InterleavedPostsKeepTotalOrder) {
  EventQueue q;
  std::vector<std::string> log;
  q.post(10, tag(EventKind::ThreadArrival), [&] {
    log.push_back("A@10");
    q.post(10, tag(EventKind::SchedTick), [&] { log.push_back("D@10"); });
    q.post(15, tag(EventKind::DmaDone), [&] { log.push_back("E@15"); });
  });
  q.post(10, tag(EventKind::Interrupt), [&] { log.push_back("B@10"); });
  q.post(20, tag(EventKind::TileDone), [&] {
    log.push_back("C@20");
    EXPECT_THROW(q.post(19, tag(EventKind::SchedTick), [] {}), ContractViolation);
  });
  q.run();
  EXPECT_EQ(log, (std::vector<std::string>{"A@10", "B@10", "D@10", "E@15", "C@20"}));
  EXPECT_EQ(q.dispatched(), 5u);
  EXPECT_EQ(q.causality_violations(), 0u);
}

TEST(EventQueue, DigestDeterministicAndTraceNeutral) {
  auto build = [](EventQueue& q, std::uint32_t thread) {
    for (Cycles t = 0; t < 50; t += 7) q.post(t, tag(EventKind::DmaDone, thread), [] {});
    q.run();
  };
  EventQueue a, b, c, d;
  build(a, 1);
  build(b, 1);
  build(c, 2);
  std::ostringstream trace;
  d.set_trace(&trace);
  build(d, 1);
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_NE(a.digest(), c.digest());
  EXPECT_EQ(a.digest(), d.digest());
  EXPECT_EQ(digest_hex(a.digest()).size(), 16u);
  EXPECT_EQ(digest_hex(0xabcULL), "0000000000000abc");

  std::istringstream lines(trace.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    ++n;
    EXPECT_EQ(line.front(), '{');
    EXPECT_NE(line.find("\"kind\":\"DMA_DONE\""), std::string::npos) << line;
    EXPECT_NE(line.find("\"thread\":1"), std::string::npos) << line;
  }
  EXPECT_EQ(n, 8u);
}
