#pragma once

#include <span>

#include "wbpsim/types.hpp"

namespace wbpsim {

/// Radix-2 decimation-in-time FFT.
///
/// Forward: X[k] = sum_n x[n] e^{-2 pi i k n / N}. The inverse transform uses
/// the conjugate kernel and scales by 1/N, so fft(fft(x), true) == x.
/// Throws std::invalid_argument unless the length is a power of two >= 2.
CplxVec fft(std::span<const Cplx> x, bool inverse = false);

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

constexpr unsigned log2_exact(std::size_t n) noexcept {
  unsigned r = 0;
  while (n > 1) {
    n >>= 1;
    ++r;
  }
  return r;
}

}  // namespace wbpsim
