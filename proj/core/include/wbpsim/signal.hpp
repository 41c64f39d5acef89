#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "wbpsim/fft.hpp"
#include "wbpsim/polar.hpp"
#include "wbpsim/rng.hpp"
#include "wbpsim/types.hpp"

namespace wbpsim {

struct OfdmConfig {
  std::size_t n_subcarriers = 128;
  std::size_t cp_len = 32;

  std::size_t symbol_len() const noexcept { return n_subcarriers + cp_len; }
  /// Throws std::invalid_argument if the invariants do not hold.
  void validate() const;
};

/// Offset-0 cyclic bit selection: out[i] = coded[i mod N], i < E.
BitVec rate_match_rv0(std::span<const Bit> coded, std::size_t E);

/// Soft inverse of rate_match_rv0: repeated positions are summed, punctured
/// positions get LLR 0.
LlrVec rate_recover_rv0(std::span<const double> llr, std::size_t N);

/// Length-31 Gold sequence, c(n) = x1(n+1600) xor x2(n+1600), with x1 fixed
/// to 1,0,...,0 and x2 initialized from the low 31 bits of c_init.
BitVec gold_sequence(std::uint32_t c_init, std::size_t length);

BitVec scramble(std::span<const Bit> bits, std::uint32_t c_init);
LlrVec descramble_llr(std::span<const double> llr, std::uint32_t c_init);

/// (b0, b1) -> ((1-2 b0) + j (1-2 b1)) / sqrt(2). Odd length is rejected.
CplxVec qpsk_mod(std::span<const Bit> bits);
/// Max-log exact for QPSK: LLR(b0) = 2 sqrt(2) Re(y) / sigma^2, LLR(b1) likewise on Im.
LlrVec qpsk_soft_demod(std::span<const Cplx> y, double noise_var);

/// One OFDM symbol: IFFT of the subcarrier vector with a cyclic prefix.
CplxVec ofdm_modulate(std::span<const Cplx> freq, const OfdmConfig& cfg);
CplxVec ofdm_demodulate(std::span<const Cplx> time, const OfdmConfig& cfg);

inline constexpr double kDegenerateEps = 1e-12;

/// H[k] = rx[k] / tx[k]. Throws DegeneratePilot if |tx[k]| <= 1e-12.
CplxVec ls_estimate(std::span<const Cplx> rx_pilots, std::span<const Cplx> tx_pilots);

struct ZfResult {
  CplxVec symbols;
  std::size_t degenerate = 0;  ///< subcarriers with |H| < eps, output zeroed
};
ZfResult zf_equalize(std::span<const Cplx> y, std::span<const Cplx> H);

inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

/// y = x + n with circular complex Gaussian noise of per-sample variance
/// mean|x|^2 / 10^(snr_db/10). snr_db = +inf returns x unchanged.
CplxVec awgn_channel(std::span<const Cplx> x, double snr_db, Rng& rng);

inline constexpr std::size_t kMaxUsersPerSlot = 20;

/// Detection is modelled as oracle-correct; the returned count only drives
/// DAG dismissal. Throws std::invalid_argument for k > 20.
std::size_t blind_detect(std::size_t slot_truth);

/// Test hook: renders a kernel's input/output pair as hex-encoded arrays,
/// one line per array ("<name>.in <hex...>", "<name>.out <hex...>"). Bits
/// are rendered as one hex digit each, reals as the 16-digit IEEE-754
/// pattern, complex values as two such patterns.
std::string kernel_io_hex(const std::string& name, std::span<const Bit> in, std::span<const Bit> out);
std::string kernel_io_hex(const std::string& name, std::span<const Cplx> in, std::span<const Cplx> out);
std::string kernel_io_hex(const std::string& name, std::span<const double> in, std::span<const Bit> out);

}  // namespace wbpsim
