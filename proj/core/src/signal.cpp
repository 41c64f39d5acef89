#include "wbpsim/signal.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace wbpsim {

void OfdmConfig::validate() const {
  if (n_subcarriers < 2 || !is_power_of_two(n_subcarriers)) {
    throw std::invalid_argument("ofdm: n_subcarriers must be a power of two");
  }
  if (cp_len >= n_subcarriers) throw std::invalid_argument("ofdm: cp_len must be < n_subcarriers");
}

BitVec rate_match_rv0(std::span<const Bit> coded, std::size_t E) {
  if (E == 0) throw std::invalid_argument("rate_match_rv0: E must be >= 1");
  if (coded.empty()) throw std::invalid_argument("rate_match_rv0: empty codeword");
  BitVec out(E);
  for (std::size_t i = 0; i < E; ++i) out[i] = coded[i % coded.size()];
  return out;
}

LlrVec rate_recover_rv0(std::span<const double> llr, std::size_t N) {
  if (N == 0) throw std::invalid_argument("rate_recover_rv0: N must be >= 1");
  LlrVec out(N, 0.0);
  for (std::size_t i = 0; i < llr.size(); ++i) out[i % N] += llr[i];
  return out;
}

BitVec gold_sequence(std::uint32_t c_init, std::size_t length) {
  constexpr std::size_t kNc = 1600;
  constexpr std::uint32_t kMask31 = 0x7fffffffU;
  // Bit k of each register holds x(n + k).
  std::uint32_t x1 = 1U;
  std::uint32_t x2 = c_init & kMask31;
  auto step = [&] {
    const std::uint32_t f1 = (x1 ^ (x1 >> 3)) & 1U;
    const std::uint32_t f2 = (x2 ^ (x2 >> 1) ^ (x2 >> 2) ^ (x2 >> 3)) & 1U;
    x1 = (x1 >> 1) | (f1 << 30);
    x2 = (x2 >> 1) | (f2 << 30);
  };
  for (std::size_t i = 0; i < kNc; ++i) step();
  BitVec c(length);
  for (std::size_t i = 0; i < length; ++i) {
    c[i] = static_cast<Bit>((x1 ^ x2) & 1U);
    step();
  }
  return c;
}

BitVec scramble(std::span<const Bit> bits, std::uint32_t c_init) {
  const BitVec c = gold_sequence(c_init, bits.size());
  BitVec out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = static_cast<Bit>((bits[i] ^ c[i]) & 1U);
  return out;
}

LlrVec descramble_llr(std::span<const double> llr, std::uint32_t c_init) {
  const BitVec c = gold_sequence(c_init, llr.size());
  LlrVec out(llr.size());
  for (std::size_t i = 0; i < llr.size(); ++i) out[i] = c[i] ? -llr[i] : llr[i];
  return out;
}

CplxVec qpsk_mod(std::span<const Bit> bits) {
  if (bits.size() % 2) throw std::invalid_argument("qpsk_mod: bit count must be even");
  constexpr double a = std::numbers::sqrt2 / 2.0;
  CplxVec out(bits.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {bits[2 * i] ? -a : a, bits[2 * i + 1] ? -a : a};
  }
  return out;
}

LlrVec qpsk_soft_demod(std::span<const Cplx> y, double noise_var) {
  if (!(noise_var > 0.0)) throw std::invalid_argument("qpsk_soft_demod: noise_var must be > 0");
  const double scale = 2.0 * std::numbers::sqrt2 / noise_var;
  LlrVec out(2 * y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[2 * i] = scale * y[i].real();
    out[2 * i + 1] = scale * y[i].imag();
  }
  return out;
}

CplxVec ofdm_modulate(std::span<const Cplx> freq, const OfdmConfig& cfg) {
  cfg.validate();
  if (freq.size() != cfg.n_subcarriers) throw std::invalid_argument("ofdm_modulate: length mismatch");
  const CplxVec body = fft(freq, true);
  CplxVec out;
  out.reserve(cfg.symbol_len());
  out.insert(out.end(), body.end() - static_cast<std::ptrdiff_t>(cfg.cp_len), body.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

CplxVec ofdm_demodulate(std::span<const Cplx> time, const OfdmConfig& cfg) {
  cfg.validate();
  if (time.size() != cfg.symbol_len()) throw std::invalid_argument("ofdm_demodulate: length mismatch");
  return fft(time.subspan(cfg.cp_len), false);
}

CplxVec ls_estimate(std::span<const Cplx> rx_pilots, std::span<const Cplx> tx_pilots) {
  if (rx_pilots.size() != tx_pilots.size()) throw std::invalid_argument("ls_estimate: length mismatch");
  CplxVec H(rx_pilots.size());
  for (std::size_t k = 0; k < H.size(); ++k) {
    if (std::abs(tx_pilots[k]) <= kDegenerateEps) {
      throw DegeneratePilot("ls_estimate: pilot " + std::to_string(k) + " is degenerate");
    }
    H[k] = rx_pilots[k] / tx_pilots[k];
  }
  return H;
}

ZfResult zf_equalize(std::span<const Cplx> y, std::span<const Cplx> H) {
  if (y.size() != H.size()) throw std::invalid_argument("zf_equalize: length mismatch");
  ZfResult r;
  r.symbols.resize(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (std::abs(H[k]) < kDegenerateEps) {
      r.symbols[k] = 0.0;
      ++r.degenerate;
    } else {
      r.symbols[k] = y[k] / H[k];
    }
  }
  return r;
}

CplxVec awgn_channel(std::span<const Cplx> x, double snr_db, Rng& rng) {
  CplxVec y(x.begin(), x.end());
  if (std::isinf(snr_db) && snr_db > 0) return y;
  if (x.empty()) return y;
  double power = 0.0;
  for (const auto& v : x) power += std::norm(v);
  power /= static_cast<double>(x.size());
  const double sigma2 = power / std::pow(10.0, snr_db / 10.0);
  const double sd = std::sqrt(sigma2 / 2.0);
  for (auto& v : y) {
    const double re = rng.gaussian();
    const double im = rng.gaussian();
    v += Cplx{sd * re, sd * im};
  }
  return y;
}

std::size_t blind_detect(std::size_t slot_truth) {
  if (slot_truth > kMaxUsersPerSlot) {
    throw std::invalid_argument("blind_detect: at most 20 users per slot, got " + std::to_string(slot_truth));
  }
  return slot_truth;
}

namespace {

void append_hex(std::string& s, double v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, " %016llx", static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  s += buf;
}

void append_bits(std::string& s, std::span<const Bit> bits) {
  static constexpr char kDigits[] = "0123456789abcdef";
  s += ' ';
  for (Bit b : bits) s += kDigits[b & 0xF];
}

}  // namespace

std::string kernel_io_hex(const std::string& name, std::span<const Bit> in, std::span<const Bit> out) {
  std::string s = name + ".in";
  append_bits(s, in);
  s += "\n" + name + ".out";
  append_bits(s, out);
  return s + "\n";
}

std::string kernel_io_hex(const std::string& name, std::span<const Cplx> in, std::span<const Cplx> out) {
  std::string s = name + ".in";
  for (const auto& v : in) {
    append_hex(s, v.real());
    append_hex(s, v.imag());
  }
  s += "\n" + name + ".out";
  for (const auto& v : out) {
    append_hex(s, v.real());
    append_hex(s, v.imag());
  }
  return s + "\n";
}

std::string kernel_io_hex(const std::string& name, std::span<const double> in, std::span<const Bit> out) {
  std::string s = name + ".in";
  for (double v : in) append_hex(s, v);
  s += "\n" + name + ".out";
  append_bits(s, out);
  return s + "\n";
}

}  // namespace wbpsim
