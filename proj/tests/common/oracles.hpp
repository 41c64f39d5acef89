#pragma once

// Reference implementations written independently of the library: slow,
// obvious, and only used to check the fast paths.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wbpsim/types.hpp"

namespace oracle {

using wbpsim::Bit;
using wbpsim::BitVec;
using wbpsim::Cplx;
using wbpsim::CplxVec;

// O(N^2) DFT with twiddles evaluated in long double.
inline CplxVec naive_dft(const CplxVec& x, bool inverse) {
  const std::size_t n = x.size();
  CplxVec out(n);
  const long double sign = inverse ? 1.0L : -1.0L;
  for (std::size_t k = 0; k < n; ++k) {
    long double re = 0, im = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const long double ang = sign * 2.0L * std::numbers::pi_v<long double> * static_cast<long double>((k * t) % n) /
                              static_cast<long double>(n);
      const long double c = std::cos(ang), s = std::sin(ang);
      re += x[t].real() * c - x[t].imag() * s;
      im += x[t].real() * s + x[t].imag() * c;
    }
    if (inverse) {
      re /= static_cast<long double>(n);
      im /= static_cast<long double>(n);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

// F^{(x)n} with F = [[1,0],[1,1]], built row by row.
inline std::vector<BitVec> kron_generator(std::size_t N) {
  std::vector<BitVec> g{{1}};
  while (g.size() < N) {
    const std::size_t s = g.size();
    std::vector<BitVec> ng(2 * s, BitVec(2 * s, 0));
    for (std::size_t r = 0; r < s; ++r)
      for (std::size_t c = 0; c < s; ++c) {
        ng[r][c] = g[r][c];
        ng[r + s][c] = g[r][c];
        ng[r + s][c + s] = g[r][c];
      }
    g = std::move(ng);
  }
  return g;
}

inline BitVec generator_encode(const BitVec& info, const BitVec& frozen) {
  const std::size_t N = frozen.size();
  BitVec u(N, 0);
  std::size_t j = 0;
  for (std::size_t i = 0; i < N; ++i)
    if (!frozen[i]) u[i] = info.at(j++);
  if (j != info.size()) throw std::invalid_argument("generator_encode: K mismatch");
  const auto g = kron_generator(N);
  BitVec x(N, 0);
  for (std::size_t r = 0; r < N; ++r)
    if (u[r])
      for (std::size_t c = 0; c < N; ++c) x[c] ^= g[r][c];
  return x;
}

// x1 with x1(0)=1, x1(1..30)=0 and x1(n+31) = x1(n+3) ^ x1(n).
inline BitVec x1_stream(std::size_t length) {
  BitVec x(std::max<std::size_t>(length, 31) + 31, 0);
  x[0] = 1;
  for (std::size_t n = 0; n + 31 < x.size(); ++n) x[n + 31] = x[n + 3] ^ x[n];
  x.resize(length);
  return x;
}

// Two 31-bit shift registers clocked one bit at a time, output discarded for
// the first 1600 clocks.
inline BitVec gold_lfsr(std::uint32_t c_init, std::size_t length) {
  std::uint32_t r1 = 1, r2 = c_init & 0x7fffffffu;
  BitVec out;
  out.reserve(length);
  for (std::size_t n = 0; n < 1600 + length; ++n) {
    if (n >= 1600) out.push_back(static_cast<Bit>((r1 ^ r2) & 1u));
    const std::uint32_t f1 = ((r1 >> 3) ^ r1) & 1u;
    const std::uint32_t f2 = ((r2 >> 3) ^ (r2 >> 2) ^ (r2 >> 1) ^ r2) & 1u;
    r1 = (r1 >> 1) | (f1 << 30);
    r2 = (r2 >> 1) | (f2 << 30);
  }
  return out;
}

inline std::string read_golden(const std::string& name) {
  const std::string path = std::string(WBPSIM_GOLDEN_DIR) + "/" + name;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace oracle
