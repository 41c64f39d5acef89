#include "wbpsim/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wbpsim {

CplxVec fft(std::span<const Cplx> x, bool inverse) {
  const std::size_t n = x.size();
  if (n < 2 || !is_power_of_two(n)) {
    throw std::invalid_argument("fft: length must be a power of two >= 2, got " + std::to_string(n));
  }
  const unsigned bits = log2_exact(n);

  CplxVec out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (unsigned b = 0; b < bits; ++b) r |= ((i >> b) & 1U) << (bits - 1 - b);
    out[r] = x[i];
  }

  // Twiddles computed directly per index; recurrence-based twiddles lose
  // accuracy at N = 2048.
  const double sign = inverse ? 1.0 : -1.0;
  CplxVec twiddle(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle[k] = {std::cos(angle), std::sin(angle)};
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const Cplx t = twiddle[j * stride] * out[start + j + half];
        const Cplx u = out[start + j];
        out[start + j] = u + t;
        out[start + j + half] = u - t;
      }
    }
  }

  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : out) v *= scale;
  }
  return out;
}

}  // namespace wbpsim
