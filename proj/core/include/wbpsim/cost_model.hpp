#pragma once

#include <array>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wbpsim/types.hpp"

namespace wbpsim {

/// Computational kernels known to the cost model.
enum class KernelKind : std::uint8_t {
  Fft,
  BpDecode,
  PolarEncode,
  RateMatch,
  RateRecover,
  Scramble,
  Descramble,
  QpskMod,
  QpskDemod,
  LsEstimate,
  ZfEqualize,
  BlindDetect,
  SlotAssembly,
  Aggregate,
  OfdmModulate,
  OfdmDemodulate,
};

inline constexpr std::size_t kKernelKindCount = 16;

std::string_view to_string(KernelKind k);
/// Throws std::invalid_argument for unknown names.
KernelKind parse_kernel_kind(std::string_view name);
std::optional<KernelKind> try_parse_kernel_kind(std::string_view name);

struct TileTiming {
  unsigned lanes = 16;
  unsigned vrf_count = 32;
  double clock_hz = 500e6;
};

/// Prototype tile classes: L = 16 lanes / 32 VRFs, S = 8 lanes / 64 VRFs.
inline constexpr TileTiming kLargeTile{16, 32, 500e6};
inline constexpr TileTiming kSmallTile{8, 64, 500e6};

struct CycleAnchor {
  KernelKind kernel = KernelKind::Fft;
  std::size_t size = 0;
  Cycles cycles = 0;
  unsigned ref_lanes = 64;
};

/// cycles(N) = a * N * log2(N) + b at the reference lane count.
struct ScalingLaw {
  double a = 0.0;
  double b = 0.0;
  bool estimated = false;  ///< not backed by measured anchors

  double eval(std::size_t n) const;
};

struct CostParams {
  std::array<ScalingLaw, kKernelKindCount> laws{};
  std::vector<CycleAnchor> anchors;
  double serial_fraction = 0.2;
  unsigned ref_lanes = 64;
  /// Iteration count the BP anchors are taken to correspond to; BP cost is
  /// scaled linearly by max_iters / bp_anchor_iters.
  unsigned bp_anchor_iters = 30;

  const ScalingLaw& law(KernelKind k) const { return laws[static_cast<std::size_t>(k)]; }
  ScalingLaw& law(KernelKind k) { return laws[static_cast<std::size_t>(k)]; }
  const CycleAnchor* find_anchor(KernelKind k, std::size_t size) const;
};

struct DmaTiming {
  Cycles setup_cycles = 20;
  Cycles bytes_per_cycle = 16;
  Cycles csr_write_cycles = 4;
};

/// Scheduler decision overheads (not reported by the hardware measurements).
struct SchedulerTiming {
  Cycles thread_eval_cycles = 50;  ///< one thread evaluation in the thread-level pass
  Cycles scan_node_cycles = 10;    ///< one node visit in the task-level scan
  Cycles tick_cycles = 1000;       ///< periodic re-evaluation cadence
};

/// Anchor lookup with fitted interpolation and lane scaling:
///   exact anchor when (kernel, size, lanes == anchor.ref_lanes) matches,
///   otherwise base * (sf + (1 - sf) * ref_lanes / lanes), never below 1.
/// Throws std::invalid_argument for size == 0 or a kernel with no law.
Cycles kernel_cycles(KernelKind kernel, std::size_t size, const TileTiming& tile, const CostParams& params);

/// Turns a normalized throughput (Mbps per lane per GHz, coded bits) into a
/// cycle anchor: cycles = N * 1e3 / (norm * lanes).
CycleAnchor bp_anchor_from_throughput(double norm_mbps_per_lane_ghz, std::size_t N, unsigned lanes);

/// setup + ceil(bytes / bytes_per_cycle)
Cycles dma_cycles(std::size_t bytes, const DmaTiming& timing);

struct FitResult {
  KernelKind kernel = KernelKind::Fft;
  ScalingLaw law;
  /// (size, relative residual (fit - anchor) / anchor) for each anchor.
  std::vector<std::pair<std::size_t, double>> residuals;
};

/// Least-squares fit of a * N log2 N + b per kernel present in `anchors`.
/// Throws InsufficientData if any kernel has fewer than two anchors.
std::vector<FitResult> fit_scaling(const std::vector<CycleAnchor>& anchors);

/// The measured single-tile anchors: FFT at N = 128/512/2048 and BP decoding
/// at N = 512/1024 (derived from normalized throughput 0.54/0.53).
std::vector<CycleAnchor> default_anchors();

/// Parses `kernel,size,cycles,ref_lanes` lines; '#' starts a comment.
std::vector<CycleAnchor> parse_anchor_table(std::istream& in);
std::vector<CycleAnchor> load_anchor_file(const std::string& path);

/// Fits the anchored kernels and fills every other kernel with the documented
/// estimate laws (flagged `estimated`).
CostParams build_cost_params(const std::vector<CycleAnchor>& anchors, double serial_fraction = 0.2);

}  // namespace wbpsim
