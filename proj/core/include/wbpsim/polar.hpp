#pragma once

#include <span>

#include "wbpsim/types.hpp"

namespace wbpsim {

/// Polar code with natural (non bit-reversed) ordering: x = u * F^{(x)n},
/// F = [[1,0],[1,1]] over GF(2).
struct PolarCode {
  unsigned n = 0;       ///< log2 of the block length
  std::size_t N = 0;    ///< coded bits, 2^n
  std::size_t K = 0;    ///< information bits
  BitVec frozen_mask;   ///< length N, 1 = frozen

  /// Non-frozen positions in ascending index order.
  std::vector<std::size_t> info_positions() const;

  /// Builds a code with an explicit frozen set. Throws std::invalid_argument
  /// if N is not a power of two or the mask length is wrong.
  static PolarCode from_mask(BitVec frozen_mask);

  /// Bhattacharyya-parameter construction: freezes the N-K least reliable
  /// synthetic channels for a BPSK-AWGN channel at `design_snr_db` (Es/N0).
  /// Ties are broken toward freezing the lower index.
  static PolarCode bhattacharyya(std::size_t N, std::size_t K, double design_snr_db = 0.0);
};

/// Frozen prior used by the BP decoder; acts as +infinity under min-sum
/// without overflowing when messages are summed.
inline constexpr double kFrozenPrior = 1e9;

/// Places `info` at the non-frozen positions (ascending) with zeros elsewhere
/// and returns u * F^{(x)n}. Throws std::invalid_argument if len(info) != K.
BitVec polar_encode(std::span<const Bit> info, const PolarCode& code);

/// Raw transform u -> u * F^{(x)n}; length must be a power of two.
BitVec polar_transform(std::span<const Bit> u);

struct BpOptions {
  unsigned max_iters = 30;
  /// Stop early once the hard u decisions re-encode to the hard x decisions.
  bool early_exit = false;
};

struct BpResult {
  BitVec info;               ///< K decoded information bits, ascending position
  unsigned iterations = 0;   ///< iterations actually run
};

/// Min-sum belief propagation over the n-stage polar factor graph.
///
/// Left messages start at the channel LLRs on the x side, right messages at
/// kFrozenPrior on frozen u positions. Each iteration runs one right-to-left
/// sweep followed by one left-to-right sweep. Hard decisions are taken on
/// L+R at the u side. Throws std::invalid_argument on length mismatch or
/// max_iters == 0.
BpResult bp_decode_full(std::span<const double> llr, const PolarCode& code, BpOptions opts = {});

inline BitVec bp_decode(std::span<const double> llr, const PolarCode& code, unsigned max_iters) {
  return bp_decode_full(llr, code, BpOptions{max_iters, false}).info;
}

}  // namespace wbpsim
