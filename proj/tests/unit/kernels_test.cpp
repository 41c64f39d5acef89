#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "wbpsim/fft.hpp"
#include "wbpsim/polar.hpp"
#include "wbpsim/rng.hpp"
#include "wbpsim/signal.hpp"

using namespace wbpsim;

namespace {

CplxVec random_cplx(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  CplxVec x(n);
  for (auto& v : x) v = {rng.gaussian(), rng.gaussian()};
  return x;
}

BitVec random_bits(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  BitVec b(n);
  for (auto& v : b) v = rng.bit();
  return b;
}

double max_err(const CplxVec& a, const CplxVec& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Fft, ImpulseHasFlatSpectrum) {
  const CplxVec x{1, 0, 0, 0};
  for (const auto& v : fft(x)) EXPECT_EQ(v, Cplx(1, 0));
}

TEST(Fft, MatchesNaiveDft) {
  for (std::size_t n = 2; n <= 2048; n *= 2) {
    const auto x = random_cplx(n, n);
    EXPECT_LT(max_err(fft(x), oracle::naive_dft(x, false)), 1e-9) << "N=" << n;
    EXPECT_LT(max_err(fft(x, true), oracle::naive_dft(x, true)), 1e-9) << "N=" << n;
  }
}

TEST(Fft, RoundTrip) {
  for (std::size_t n = 2; n <= 2048; n *= 2) {
    const auto x = random_cplx(n, 100 + n);
    double scale = 0;
    for (const auto& v : x) scale = std::max(scale, std::abs(v));
    EXPECT_LT(max_err(fft(fft(x), true), x) / scale, 1e-12) << "N=" << n;
  }
}

TEST(Fft, RejectsNonPowerOfTwo) {
  EXPECT_THROW(fft(CplxVec(6)), std::invalid_argument);
  EXPECT_THROW(fft(CplxVec(1)), std::invalid_argument);
  EXPECT_THROW(fft(CplxVec{}), std::invalid_argument);
}

TEST(Polar, TwoBitExample) {
  const auto code = PolarCode::from_mask(BitVec{0, 0});
  EXPECT_EQ(polar_encode(BitVec{1, 0}, code), (BitVec{1, 0}));
  EXPECT_EQ(polar_encode(BitVec{0, 1}, code), (BitVec{1, 1}));
}

TEST(Polar, MatchesGeneratorMatrix) {
  const auto code = PolarCode::from_mask(BitVec{1, 1, 1, 0, 1, 0, 0, 0});
  ASSERT_EQ(code.K, 4u);
  for (int w = 0; w < 20; ++w) {
    const auto info = random_bits(4, 7 + w);
    EXPECT_EQ(polar_encode(info, code), oracle::generator_encode(info, code.frozen_mask));
  }
  for (std::size_t N : {16u, 32u, 64u}) {
    const auto c = PolarCode::bhattacharyya(N, N / 2);
    for (int w = 0; w < 10; ++w) {
      const auto info = random_bits(c.K, N * 31 + w);
      EXPECT_EQ(polar_encode(info, c), oracle::generator_encode(info, c.frozen_mask)) << "N=" << N;
    }
  }
}

TEST(Polar, LinearAndZeroPreserving) {
  const auto code = PolarCode::bhattacharyya(64, 32);
  EXPECT_EQ(polar_encode(BitVec(32, 0), code), BitVec(64, 0));
  const auto a = random_bits(32, 1), b = random_bits(32, 2);
  BitVec ab(32);
  for (std::size_t i = 0; i < 32; ++i) ab[i] = a[i] ^ b[i];
  const auto ea = polar_encode(a, code), eb = polar_encode(b, code), eab = polar_encode(ab, code);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(eab[i], ea[i] ^ eb[i]);
}

TEST(Polar, FrozenSetShape) {
  const auto code = PolarCode::bhattacharyya(512, 256);
  std::size_t frozen = 0;
  for (auto f : code.frozen_mask) frozen += f;
  EXPECT_EQ(frozen, 256u);
  // Position 0 is the least reliable channel, N-1 the most reliable.
  EXPECT_EQ(code.frozen_mask.front(), 1);
  EXPECT_EQ(code.frozen_mask.back(), 0);
  EXPECT_THROW(polar_encode(BitVec(10), code), std::invalid_argument);
}

TEST(Polar, BpRecoversNoiselessWords) {
  const auto code = PolarCode::bhattacharyya(64, 32);
  for (int w = 0; w < 50; ++w) {
    const auto info = random_bits(32, 500 + w);
    const auto x = polar_encode(info, code);
    LlrVec llr(64);
    for (std::size_t i = 0; i < 64; ++i) llr[i] = x[i] ? -30.0 : 30.0;
    EXPECT_EQ(bp_decode(llr, code, 30), info);
  }
}

TEST(Polar, BpAllFrozenGivesEmptyOutput) {
  const auto code = PolarCode::from_mask(BitVec(8, 1));
  EXPECT_TRUE(bp_decode(LlrVec(8, 1.0), code, 5).empty());
  EXPECT_THROW(bp_decode(LlrVec(4, 1.0), code, 5), std::invalid_argument);
}

TEST(Polar, BpEarlyExitStopsOnConsistentWord) {
  const auto code = PolarCode::bhattacharyya(128, 64);
  const auto info = random_bits(64, 9);
  const auto x = polar_encode(info, code);
  LlrVec llr(128);
  for (std::size_t i = 0; i < 128; ++i) llr[i] = x[i] ? -10.0 : 10.0;
  const auto r = bp_decode_full(llr, code, BpOptions{30, true});
  EXPECT_EQ(r.info, info);
  EXPECT_LT(r.iterations, 30u);
  EXPECT_EQ(bp_decode_full(llr, code, BpOptions{30, false}).iterations, 30u);
}

TEST(RateMatch, SelectionAndRecovery) {
  const BitVec c{1, 0, 1, 1, 0, 0, 1, 0};
  EXPECT_EQ(rate_match_rv0(c, 8), c);
  EXPECT_EQ(rate_match_rv0(c, 4), (BitVec{1, 0, 1, 1}));
  EXPECT_EQ(rate_match_rv0(BitVec{0, 1, 1, 0}, 6), (BitVec{0, 1, 1, 0, 0, 1}));
  EXPECT_THROW(rate_match_rv0(c, 0), std::invalid_argument);

  EXPECT_EQ(rate_recover_rv0(LlrVec(6, 1.0), 4), (LlrVec{2, 2, 1, 1}));
  const auto punct = rate_recover_rv0(LlrVec{1, 2, 3, 4}, 8);
  for (std::size_t i = 4; i < 8; ++i) EXPECT_EQ(punct[i], 0.0);
  EXPECT_THROW(rate_recover_rv0(LlrVec{1}, 0), std::invalid_argument);
}

TEST(Gold, MatchesBitSerialLfsr) {
  for (std::uint32_t c_init : {0u, 1u, 0x2f1u, 0x12345u, 0x7fffffffu}) {
    const auto got = gold_sequence(c_init, 10000);
    const auto ref = oracle::gold_lfsr(c_init, 10000);
    EXPECT_EQ(got, ref) << "c_init=" << c_init;
  }
}

TEST(Gold, ZeroSeedIsPureX1Stream) {
  const auto seq = gold_sequence(0, 200);
  const auto x1 = oracle::x1_stream(1600 + 200);
  for (std::size_t n = 0; n < 200; ++n) EXPECT_EQ(seq[n], x1[n + 1600]);
}

TEST(Scramble, XorAndInvolution) {
  const auto bits = random_bits(256, 3);
  const auto g = gold_sequence(77, 256);
  const auto s = scramble(bits, 77);
  for (std::size_t i = 0; i < 256; ++i) EXPECT_EQ(s[i], bits[i] ^ g[i]);
  EXPECT_EQ(scramble(s, 77), bits);
  EXPECT_EQ(scramble(BitVec(64, 0), 5), gold_sequence(5, 64));

  const LlrVec llr{1.5, -2.0, 3.0, 0.25, -0.5, 8.0};
  const auto d = descramble_llr(llr, 77);
  const auto g6 = gold_sequence(77, 6);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(d[i], g6[i] ? -llr[i] : llr[i]);
  EXPECT_EQ(descramble_llr(d, 77), llr);
}

TEST(Qpsk, MappingAndSoftDemod) {
  const double a = 1.0 / std::sqrt(2.0);
  const auto s = qpsk_mod(BitVec{0, 0, 1, 1, 0, 1, 1, 0});
  EXPECT_NEAR(s[0].real(), a, 1e-15);
  EXPECT_NEAR(s[0].imag(), a, 1e-15);
  EXPECT_NEAR(s[1].real(), -a, 1e-15);
  EXPECT_NEAR(s[1].imag(), -a, 1e-15);
  for (const auto& v : s) EXPECT_NEAR(std::abs(v), 1.0, 1e-15);
  EXPECT_THROW(qpsk_mod(BitVec{1}), std::invalid_argument);

  const BitVec bits{0, 0, 0, 1, 1, 0, 1, 1};
  const auto llr = qpsk_soft_demod(qpsk_mod(bits), 0.5);
  ASSERT_EQ(llr.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(llr[i] < 0, bits[i] == 1);
  EXPECT_NEAR(llr[0], 2 * std::sqrt(2.0) * a / 0.5, 1e-12);
  const auto half = qpsk_soft_demod(qpsk_mod(bits), 0.25);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(half[i], 2 * llr[i], 1e-12);
  EXPECT_THROW(qpsk_soft_demod(CplxVec{1}, 0.0), std::invalid_argument);
}

TEST(Ofdm, CyclicPrefixAndRoundTrip) {
  const OfdmConfig cfg;
  const auto X = random_cplx(128, 11);
  const auto t = ofdm_modulate(X, cfg);
  ASSERT_EQ(t.size(), 160u);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(t[i], t[128 + i]);
  EXPECT_LT(max_err(ofdm_demodulate(t, cfg), X), 1e-12);
  EXPECT_THROW(ofdm_modulate(CplxVec(64), cfg), std::invalid_argument);
  EXPECT_THROW(ofdm_demodulate(CplxVec(128), cfg), std::invalid_argument);
}

TEST(Ofdm, SingleSubcarrierIsComplexExponential) {
  const OfdmConfig cfg;
  const std::size_t k = 5, N = 128;
  CplxVec X(N);
  X[k] = 1.0;
  const auto t = ofdm_modulate(X, cfg);
  for (std::size_t n = 0; n < N; ++n) {
    const Cplx want = std::polar(1.0 / N, 2 * std::numbers::pi * double(k * n) / N);
    EXPECT_LT(std::abs(t[cfg.cp_len + n] - want), 1e-15);
  }
}

TEST(Ofdm, ShiftInsidePrefixRotatesPhase) {
  const OfdmConfig cfg;
  const std::size_t N = 128, s = 3;
  const auto X = random_cplx(N, 12);
  const auto t = ofdm_modulate(X, cfg);
  // Start the FFT window s samples early: a cyclic delay by s.
  CplxVec window(t.begin() + static_cast<long>(cfg.cp_len - s), t.begin() + static_cast<long>(cfg.cp_len - s + N));
  CplxVec padded(cfg.cp_len, 0.0);
  padded.insert(padded.end(), window.begin(), window.end());
  const auto Y = ofdm_demodulate(padded, cfg);
  for (std::size_t k = 0; k < N; ++k) {
    const Cplx rot = std::polar(1.0, -2 * std::numbers::pi * double(k * s) / N);
    EXPECT_LT(std::abs(Y[k] - X[k] * rot), 1e-9);
  }
}

TEST(Ofdm, FlatChannelScalesSpectrum) {
  const OfdmConfig cfg;
  const auto X = random_cplx(128, 13);
  auto t = ofdm_modulate(X, cfg);
  const Cplx c(0.3, -1.2);
  for (auto& v : t) v *= c;
  const auto Y = ofdm_demodulate(t, cfg);
  for (std::size_t k = 0; k < 128; ++k) EXPECT_LT(std::abs(Y[k] - c * X[k]), 1e-12);
}

TEST(Channel, LsAndZf) {
  const auto tx = qpsk_mod(random_bits(256, 14));
  const auto H = random_cplx(128, 15);
  CplxVec rx(128);
  for (std::size_t k = 0; k < 128; ++k) rx[k] = H[k] * tx[k];
  const auto est = ls_estimate(rx, tx);
  for (std::size_t k = 0; k < 128; ++k) EXPECT_LT(std::abs(est[k] - H[k]), 1e-12);
  for (const auto& v : ls_estimate(tx, tx)) EXPECT_LT(std::abs(v - Cplx(1, 0)), 1e-15);

  const auto eq = zf_equalize(rx, est);
  EXPECT_EQ(eq.degenerate, 0u);
  for (std::size_t k = 0; k < 128; ++k) EXPECT_LT(std::abs(eq.symbols[k] - tx[k]), 1e-12);

  CplxVec Hz(4, 1.0);
  Hz[2] = 0.0;
  const auto z = zf_equalize(CplxVec{1, 2, 3, 4}, Hz);
  EXPECT_EQ(z.degenerate, 1u);
  EXPECT_EQ(z.symbols[2], Cplx(0, 0));
  EXPECT_EQ(z.symbols[3], Cplx(4, 0));

  CplxVec bad = tx;
  bad[7] = 0.0;
  EXPECT_THROW(ls_estimate(rx, bad), DegeneratePilot);
}

TEST(Channel, LsEstimateAt30dB) {
  const auto tx = qpsk_mod(random_bits(256, 16));
  const auto H = random_cplx(128, 17);
  double err = 0, ref = 0;
  Rng rng(18);
  for (int trial = 0; trial < 100; ++trial) {
    CplxVec rx(128);
    for (std::size_t k = 0; k < 128; ++k) rx[k] = H[k] * tx[k];
    const auto noisy = awgn_channel(rx, 30.0, rng);
    const auto est = ls_estimate(noisy, tx);
    for (std::size_t k = 0; k < 128; ++k) {
      err += std::norm(est[k] - H[k]);
      ref += std::norm(H[k]);
    }
  }
  // Unit-modulus pilots make the estimate error exactly the per-sample noise,
  // whose expected power is mean|H|^2 / 10^3.
  EXPECT_NEAR(err / ref, 1e-3, 0.1e-3);
}

TEST(Channel, AwgnStatistics) {
  const CplxVec x = qpsk_mod(random_bits(200000, 19));
  Rng a(5), b(5);
  EXPECT_EQ(awgn_channel(x, kNoiselessSnr, a), x);
  const auto y1 = awgn_channel(x, 6.0, a);
  EXPECT_NE(y1, x);
  EXPECT_EQ(awgn_channel(x, 6.0, b), y1);
  double var = 0;
  for (std::size_t i = 0; i < x.size(); ++i) var += std::norm(y1[i] - x[i]);
  var /= static_cast<double>(x.size());
  const double want = 1.0 / std::pow(10.0, 0.6);
  EXPECT_NEAR(var, want, 0.05 * want);
}

TEST(BlindDetect, OracleCorrect) {
  EXPECT_EQ(blind_detect(20), 20u);
  EXPECT_EQ(blind_detect(0), 0u);
  EXPECT_EQ(blind_detect(3), 3u);
  EXPECT_THROW(blind_detect(21), std::invalid_argument);
}

TEST(Golden, KernelIoDumps) {
  const auto code = PolarCode::from_mask(BitVec{1, 1, 1, 1, 1, 1, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0});
  const BitVec info{1, 0, 1, 1, 0, 0, 1, 0};
  const std::string got = kernel_io_hex("polar_encode", info, polar_encode(info, code)) +
                          kernel_io_hex("scramble", BitVec(24, 0), scramble(BitVec(24, 0), 0x2f1)) +
                          kernel_io_hex("rate_match", polar_encode(info, code), rate_match_rv0(polar_encode(info, code), 20));
  const auto sym = qpsk_mod(BitVec{0, 0, 0, 1, 1, 0, 1, 1});
  const std::string qpsk = kernel_io_hex("qpsk_mod", CplxVec{}, sym);
  EXPECT_EQ(got, oracle::read_golden("kernels_bits.hex"));
  EXPECT_EQ(qpsk, oracle::read_golden("qpsk_mod.hex"));
}
