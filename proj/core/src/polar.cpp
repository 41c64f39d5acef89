#include "wbpsim/polar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wbpsim/fft.hpp"

namespace wbpsim {

namespace {

inline double min_sum(double a, double b) {
  const double m = std::min(std::abs(a), std::abs(b));
  return ((a < 0) != (b < 0)) ? -m : m;
}

}  // namespace

std::vector<std::size_t> PolarCode::info_positions() const {
  std::vector<std::size_t> pos;
  pos.reserve(K);
  for (std::size_t i = 0; i < frozen_mask.size(); ++i) {
    if (!frozen_mask[i]) pos.push_back(i);
  }
  return pos;
}

PolarCode PolarCode::from_mask(BitVec frozen_mask) {
  const std::size_t N = frozen_mask.size();
  if (!is_power_of_two(N)) throw std::invalid_argument("polar: N must be a power of two");
  PolarCode code;
  code.n = log2_exact(N);
  code.N = N;
  std::size_t frozen = 0;
  for (Bit b : frozen_mask) {
    if (b > 1) throw std::invalid_argument("polar: frozen mask must be 0/1");
    frozen += b;
  }
  code.K = N - frozen;
  code.frozen_mask = std::move(frozen_mask);
  return code;
}

PolarCode PolarCode::bhattacharyya(std::size_t N, std::size_t K, double design_snr_db) {
  if (!is_power_of_two(N)) throw std::invalid_argument("polar: N must be a power of two");
  if (K > N) throw std::invalid_argument("polar: K must not exceed N");
  const unsigned n = log2_exact(N);
  const double z0 = std::exp(-std::pow(10.0, design_snr_db / 10.0));

  // The most significant index bit selects the first polarization step
  // applied to the physical channel: 0 -> degraded, 1 -> upgraded.
  std::vector<double> z(N);
  for (std::size_t i = 0; i < N; ++i) {
    double v = z0;
    for (unsigned b = n; b-- > 0;) {
      v = ((i >> b) & 1U) ? v * v : 2.0 * v - v * v;
    }
    z[i] = v;
  }

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });

  BitVec mask(N, 0);
  for (std::size_t i = 0; i < N - K; ++i) mask[order[i]] = 1;
  return from_mask(std::move(mask));
}

BitVec polar_transform(std::span<const Bit> u) {
  if (!is_power_of_two(u.size())) throw std::invalid_argument("polar_transform: length must be a power of two");
  BitVec v(u.begin(), u.end());
  const std::size_t N = v.size();
  for (std::size_t step = 1; step < N; step <<= 1) {
    for (std::size_t i = 0; i < N; ++i) {
      if (!(i & step)) v[i] ^= v[i + step];
    }
  }
  return v;
}

BitVec polar_encode(std::span<const Bit> info, const PolarCode& code) {
  if (info.size() != code.K) {
    throw std::invalid_argument("polar_encode: expected " + std::to_string(code.K) + " info bits, got " +
                                std::to_string(info.size()));
  }
  BitVec u(code.N, 0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < code.N; ++i) {
    if (!code.frozen_mask[i]) u[i] = info[k++] & 1U;
  }
  return polar_transform(u);
}

BpResult bp_decode_full(std::span<const double> llr, const PolarCode& code, BpOptions opts) {
  if (llr.size() != code.N) {
    throw std::invalid_argument("bp_decode: expected " + std::to_string(code.N) + " LLRs, got " +
                                std::to_string(llr.size()));
  }
  if (opts.max_iters == 0) throw std::invalid_argument("bp_decode: max_iters must be >= 1");

  const std::size_t N = code.N;
  const unsigned n = code.n;
  BpResult result;
  if (code.K == 0) return result;

  // Stage 0 is the u side, stage n the channel side. Layer t joins stage t
  // and t+1 with butterflies of span 2^t.
  std::vector<LlrVec> left(n + 1, LlrVec(N, 0.0));
  std::vector<LlrVec> right(n + 1, LlrVec(N, 0.0));
  std::copy(llr.begin(), llr.end(), left[n].begin());
  for (std::size_t i = 0; i < N; ++i) right[0][i] = code.frozen_mask[i] ? kFrozenPrior : 0.0;

  const auto info_pos = code.info_positions();
  BitVec u_hat(N), x_hat(N);

  for (unsigned iter = 1; iter <= opts.max_iters; ++iter) {
    for (unsigned t = n; t-- > 0;) {
      const std::size_t span = std::size_t{1} << t;
      const auto& lr = left[t + 1];
      const auto& rl = right[t];
      auto& ll = left[t];
      for (std::size_t i = 0; i < N; ++i) {
        if (i & span) continue;
        const std::size_t j = i + span;
        ll[i] = min_sum(lr[i], lr[j] + rl[j]);
        ll[j] = min_sum(lr[i], rl[i]) + lr[j];
      }
    }
    for (unsigned t = 0; t < n; ++t) {
      const std::size_t span = std::size_t{1} << t;
      const auto& lr = left[t + 1];
      const auto& rl = right[t];
      auto& rr = right[t + 1];
      for (std::size_t i = 0; i < N; ++i) {
        if (i & span) continue;
        const std::size_t j = i + span;
        rr[i] = min_sum(rl[i], lr[j] + rl[j]);
        rr[j] = min_sum(rl[i], lr[i]) + rl[j];
      }
    }
    result.iterations = iter;

    if (opts.early_exit && iter < opts.max_iters) {
      for (std::size_t i = 0; i < N; ++i) {
        u_hat[i] = code.frozen_mask[i] ? 0 : static_cast<Bit>(left[0][i] + right[0][i] < 0);
        x_hat[i] = static_cast<Bit>(left[n][i] + right[n][i] < 0);
      }
      if (polar_transform(u_hat) == x_hat) break;
    }
  }

  result.info.reserve(code.K);
  for (std::size_t p : info_pos) result.info.push_back(static_cast<Bit>(left[0][p] + right[0][p] < 0));
  return result;
}

}  // namespace wbpsim
