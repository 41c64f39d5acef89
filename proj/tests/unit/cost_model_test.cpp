#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "wbpsim/cost_model.hpp"

using namespace wbpsim;

namespace {

const TileTiming kRef{64, 32, 500e6};

// Centered least squares of y on x = N log2 N.
std::pair<double, double> line_fit(const std::vector<std::pair<double, double>>& pts) {
  double mx = 0, my = 0;
  for (auto [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double num = 0, den = 0;
  for (auto [x, y] : pts) {
    num += (x - mx) * (y - my);
    den += (x - mx) * (x - mx);
  }
  const double a = num / den;
  return {a, my - a * mx};
}

double nlogn(double n) { return n * std::log2(n); }

}  // namespace

TEST(CostModel, AnchorsAreExact) {
  const auto p = build_cost_params(default_anchors());
  EXPECT_EQ(kernel_cycles(KernelKind::Fft, 128, kRef, p), 251u);
  EXPECT_EQ(kernel_cycles(KernelKind::Fft, 512, kRef, p), 1122u);
  EXPECT_EQ(kernel_cycles(KernelKind::Fft, 2048, kRef, p), 5073u);
  EXPECT_EQ(kernel_cycles(KernelKind::BpDecode, 512, kRef, p), 14815u);
  EXPECT_EQ(kernel_cycles(KernelKind::BpDecode, 1024, kRef, p), 30189u);
}

TEST(CostModel, BpAnchorFromThroughput) {
  EXPECT_NEAR(static_cast<double>(bp_anchor_from_throughput(0.53, 1024, 64).cycles), 1024e3 / (0.53 * 64), 0.5);
  EXPECT_NEAR(static_cast<double>(bp_anchor_from_throughput(0.54, 512, 64).cycles), 512e3 / (0.54 * 64), 0.5);
  const auto a = bp_anchor_from_throughput(0.5, 1024, 64);
  const auto b = bp_anchor_from_throughput(0.5, 1024, 128);
  EXPECT_EQ(a.cycles, 2 * b.cycles);
  EXPECT_EQ(a.kernel, KernelKind::BpDecode);
  EXPECT_EQ(b.ref_lanes, 128u);
  EXPECT_THROW(bp_anchor_from_throughput(0.0, 512, 64), std::invalid_argument);
}

TEST(CostModel, DmaCycles) {
  const DmaTiming t;
  EXPECT_EQ(dma_cycles(0, t), 20u);
  EXPECT_EQ(dma_cycles(16, t), 21u);
  EXPECT_EQ(dma_cycles(17, t), 22u);
  EXPECT_EQ(dma_cycles(1000, t), 83u);
  EXPECT_EQ(dma_cycles(160, t), 30u);
}

TEST(CostModel, InterpolatesWithFittedLaw) {
  const auto p = build_cost_params(default_anchors());
  const auto [a, b] = line_fit({{nlogn(128), 251}, {nlogn(512), 1122}, {nlogn(2048), 5073}});
  EXPECT_NEAR(p.law(KernelKind::Fft).a, a, 1e-9);
  EXPECT_NEAR(p.law(KernelKind::Fft).b, b, 1e-6);
  EXPECT_EQ(kernel_cycles(KernelKind::Fft, 256, kRef, p), static_cast<Cycles>(std::llround(a * nlogn(256) + b)));
  EXPECT_FALSE(p.law(KernelKind::Fft).estimated);
  EXPECT_TRUE(p.law(KernelKind::Scramble).estimated);
}

TEST(CostModel, FitResiduals) {
  const auto fits = fit_scaling(default_anchors());
  ASSERT_EQ(fits.size(), 2u);
  for (const auto& f : fits)
    for (auto [n, r] : f.residuals) EXPECT_LT(std::abs(r), 0.10) << to_string(f.kernel) << " N=" << n;

  std::vector<CycleAnchor> exact;
  for (std::size_t n : {64u, 256u, 1024u}) exact.push_back({KernelKind::Fft, n, static_cast<Cycles>(3 * nlogn(n) + 100), 64});
  const auto on_line = fit_scaling(exact);
  for (auto [n, r] : on_line.front().residuals) EXPECT_NEAR(r, 0.0, 1e-12);

  EXPECT_THROW(fit_scaling({{KernelKind::Fft, 128, 251, 64}}), InsufficientData);
}

TEST(CostModel, LaneScaling) {
  const auto p = build_cost_params(default_anchors());
  const double sf = 0.2;
  const double base = 251.0;
  EXPECT_EQ(kernel_cycles(KernelKind::Fft, 128, kLargeTile, p), std::llround(base * (sf + (1 - sf) * 64 / 16)));
  EXPECT_EQ(kernel_cycles(KernelKind::Fft, 128, kSmallTile, p), std::llround(base * (sf + (1 - sf) * 64 / 8)));
  for (KernelKind k : {KernelKind::Fft, KernelKind::BpDecode, KernelKind::Scramble, KernelKind::QpskDemod}) {
    for (std::size_t n : {64u, 128u, 512u, 1024u}) {
      const auto l = kernel_cycles(k, n, kLargeTile, p);
      const auto s = kernel_cycles(k, n, kSmallTile, p);
      EXPECT_LT(l, s);
      EXPECT_GE(static_cast<double>(l), sf * static_cast<double>(kernel_cycles(k, n, kRef, p)) - 1);
    }
  }
}

TEST(CostModel, MonotoneInSize) {
  const auto p = build_cost_params(default_anchors());
  for (std::size_t k = 0; k < kKernelKindCount; ++k) {
    const auto kind = static_cast<KernelKind>(k);
    for (const TileTiming& t : {kRef, kLargeTile, kSmallTile}) {
      Cycles prev = 0;
      for (std::size_t n = 8; n <= 4096; n *= 2) {
        const Cycles c = kernel_cycles(kind, n, t, p);
        EXPECT_GE(c, prev) << to_string(kind) << " N=" << n;
        EXPECT_GE(c, 1u);
        prev = c;
      }
    }
  }
}

TEST(CostModel, Errors) {
  const auto p = build_cost_params(default_anchors());
  EXPECT_THROW(kernel_cycles(KernelKind::Fft, 0, kRef, p), std::invalid_argument);
  EXPECT_THROW(parse_kernel_kind("ifft"), std::invalid_argument);
  EXPECT_EQ(parse_kernel_kind("bp_decode"), KernelKind::BpDecode);
  CostParams empty;
  EXPECT_THROW(kernel_cycles(KernelKind::Fft, 128, kRef, empty), std::invalid_argument);
  EXPECT_THROW(build_cost_params(default_anchors(), 1.5), std::invalid_argument);
}

TEST(CostModel, AnchorTableParsing) {
  std::istringstream in("kernel,size,cycles,ref_lanes\n# comment\nfft,128,251,64\n\nbp_decode, 512, 14815, 64 # tail\n");
  const auto anchors = parse_anchor_table(in);
  ASSERT_EQ(anchors.size(), 2u);
  EXPECT_EQ(anchors[1].kernel, KernelKind::BpDecode);
  EXPECT_EQ(anchors[1].cycles, 14815u);

  std::istringstream bad("fft,128,251\n");
  EXPECT_THROW(parse_anchor_table(bad), ParseError);
  std::istringstream unknown("fft,128,251,64\nwarp,1,1,1\n");
  try {
    parse_anchor_table(unknown);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }

  const auto shipped = load_anchor_file(WBPSIM_DATA_DIR "/anchors.csv");
  ASSERT_EQ(shipped.size(), default_anchors().size());
  for (std::size_t i = 0; i < shipped.size(); ++i) {
    EXPECT_EQ(shipped[i].kernel, default_anchors()[i].kernel);
    EXPECT_EQ(shipped[i].size, default_anchors()[i].size);
    EXPECT_EQ(shipped[i].cycles, default_anchors()[i].cycles);
  }
}
