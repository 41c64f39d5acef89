#include "wbpsim/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wbpsim {

namespace {

constexpr std::array<std::string_view, kKernelKindCount> kKernelNames = {
    "fft",       "bp_decode",  "polar_encode", "rate_match",  "rate_recover",
    "scramble",  "descramble", "qpsk_mod",     "qpsk_demod",  "ls_estimate",
    "zf_equalize", "blind_detect", "slot_assembly", "aggregate", "ofdm_modulate",
    "ofdm_demodulate",
};

double n_log_n(std::size_t n) {
  const double x = static_cast<double>(n);
  return n > 1 ? x * std::log2(x) : 0.0;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string_view to_string(KernelKind k) { return kKernelNames[static_cast<std::size_t>(k)]; }

std::optional<KernelKind> try_parse_kernel_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKernelNames.size(); ++i) {
    if (kKernelNames[i] == name) return static_cast<KernelKind>(i);
  }
  return std::nullopt;
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (auto k = try_parse_kernel_kind(name)) return *k;
  throw std::invalid_argument("unknown kernel kind '" + std::string(name) + "'");
}

double ScalingLaw::eval(std::size_t n) const { return a * n_log_n(n) + b; }

const CycleAnchor* CostParams::find_anchor(KernelKind k, std::size_t size) const {
  for (const auto& a : anchors) {
    if (a.kernel == k && a.size == size) return &a;
  }
  return nullptr;
}

Cycles kernel_cycles(KernelKind kernel, std::size_t size, const TileTiming& tile, const CostParams& params) {
  if (size == 0) throw std::invalid_argument("kernel_cycles: size must be > 0");
  if (tile.lanes == 0) throw std::invalid_argument("kernel_cycles: tile has zero lanes");

  double base = 0.0;
  unsigned ref = params.ref_lanes;
  if (const CycleAnchor* anchor = params.find_anchor(kernel, size)) {
    if (anchor->ref_lanes == tile.lanes) return anchor->cycles;
    base = static_cast<double>(anchor->cycles);
    ref = anchor->ref_lanes;
  } else {
    const ScalingLaw& law = params.law(kernel);
    if (law.a <= 0.0) {
      throw std::invalid_argument("kernel_cycles: no cost law for kernel '" + std::string(to_string(kernel)) + "'");
    }
    base = law.eval(size);
  }
  const double sf = params.serial_fraction;
  const double scaled = base * (sf + (1.0 - sf) * static_cast<double>(ref) / static_cast<double>(tile.lanes));
  return std::max<Cycles>(1, static_cast<Cycles>(std::llround(scaled)));
}

CycleAnchor bp_anchor_from_throughput(double norm_mbps_per_lane_ghz, std::size_t N, unsigned lanes) {
  if (!(norm_mbps_per_lane_ghz > 0.0)) throw std::invalid_argument("bp_anchor_from_throughput: throughput must be > 0");
  const double cycles = static_cast<double>(N) * 1e3 / (norm_mbps_per_lane_ghz * static_cast<double>(lanes));
  return CycleAnchor{KernelKind::BpDecode, N, static_cast<Cycles>(std::llround(cycles)), lanes};
}

Cycles dma_cycles(std::size_t bytes, const DmaTiming& timing) {
  if (timing.bytes_per_cycle == 0) throw std::invalid_argument("dma_cycles: zero bandwidth");
  return timing.setup_cycles + (bytes + timing.bytes_per_cycle - 1) / timing.bytes_per_cycle;
}

std::vector<FitResult> fit_scaling(const std::vector<CycleAnchor>& anchors) {
  std::map<KernelKind, std::vector<const CycleAnchor*>> by_kernel;
  for (const auto& a : anchors) by_kernel[a.kernel].push_back(&a);

  std::vector<FitResult> results;
  for (const auto& [kernel, pts] : by_kernel) {
    if (pts.size() < 2) {
      throw InsufficientData("fit_scaling: kernel '" + std::string(to_string(kernel)) +
                             "' needs at least 2 anchors, has " + std::to_string(pts.size()));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto* p : pts) {
      const double x = n_log_n(p->size);
      const double y = static_cast<double>(p->cycles);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double m = static_cast<double>(pts.size());
    const double den = m * sxx - sx * sx;
    if (std::abs(den) < 1e-12) {
      throw InsufficientData("fit_scaling: anchors for '" + std::string(to_string(kernel)) + "' share one size");
    }
    FitResult r;
    r.kernel = kernel;
    r.law.a = (m * sxy - sx * sy) / den;
    r.law.b = (sy - r.law.a * sx) / m;
    for (const auto* p : pts) {
      const double fit = r.law.eval(p->size);
      r.residuals.emplace_back(p->size, (fit - static_cast<double>(p->cycles)) / static_cast<double>(p->cycles));
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<CycleAnchor> default_anchors() {
  return {
      {KernelKind::Fft, 128, 251, 64},
      {KernelKind::Fft, 512, 1122, 64},
      {KernelKind::Fft, 2048, 5073, 64},
      bp_anchor_from_throughput(0.54, 512, 64),
      bp_anchor_from_throughput(0.53, 1024, 64),
  };
}

std::vector<CycleAnchor> parse_anchor_table(std::istream& in) {
  std::vector<CycleAnchor> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    if (fields.size() != 4) throw ParseError(line_no, "expected kernel,size,cycles,ref_lanes");
    // Header row is optional.
    if (line_no == 1 && fields[0] == "kernel") continue;
    CycleAnchor a;
    auto kind = try_parse_kernel_kind(fields[0]);
    if (!kind) throw ParseError(line_no, "unknown kernel '" + fields[0] + "'");
    a.kernel = *kind;
    try {
      a.size = std::stoull(fields[1]);
      a.cycles = std::stoull(fields[2]);
      a.ref_lanes = static_cast<unsigned>(std::stoul(fields[3]));
    } catch (const std::exception&) {
      throw ParseError(line_no, "non-numeric field");
    }
    if (a.size == 0 || a.cycles == 0 || a.ref_lanes == 0) throw ParseError(line_no, "size, cycles and lanes must be > 0");
    out.push_back(a);
  }
  return out;
}

std::vector<CycleAnchor> load_anchor_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open anchor file '" + path + "'");
  return parse_anchor_table(in);
}

CostParams build_cost_params(const std::vector<CycleAnchor>& anchors, double serial_fraction) {
  if (serial_fraction < 0.0 || serial_fraction > 1.0) {
    throw std::invalid_argument("serial_fraction must be within [0, 1]");
  }
  CostParams p;
  p.serial_fraction = serial_fraction;
  p.anchors = anchors;
  if (!anchors.empty()) p.ref_lanes = anchors.front().ref_lanes;

  // Estimates for kernels without published cycle counts, at the reference
  // lane count. Element-wise kernels are a few element operations per lane.
  auto est = [&](KernelKind k, double a, double b) { p.law(k) = ScalingLaw{a, b, true}; };
  est(KernelKind::PolarEncode, 0.020, 40);
  est(KernelKind::RateMatch, 0.008, 30);
  est(KernelKind::RateRecover, 0.008, 30);
  est(KernelKind::Scramble, 0.012, 40);
  est(KernelKind::Descramble, 0.012, 40);
  est(KernelKind::QpskMod, 0.010, 20);
  est(KernelKind::QpskDemod, 0.015, 20);
  est(KernelKind::LsEstimate, 0.030, 30);
  est(KernelKind::ZfEqualize, 0.030, 30);
  est(KernelKind::BlindDetect, 0.020, 200);
  est(KernelKind::SlotAssembly, 0.004, 60);
  est(KernelKind::Aggregate, 0.004, 40);

  // Also fallback guesses for FFT/BP should they lack anchors.
  est(KernelKind::Fft, 0.22, 40);
  est(KernelKind::BpDecode, 2.7, 2200);

  std::map<KernelKind, std::size_t> count;
  for (const auto& a : anchors) ++count[a.kernel];
  std::vector<CycleAnchor> fittable;
  for (const auto& a : anchors) {
    if (count[a.kernel] >= 2) fittable.push_back(a);
  }
  for (const auto& r : fit_scaling(fittable)) {
    ScalingLaw law = r.law;
    law.estimated = false;
    // A fit with non-positive slope cannot be used for interpolation.
    if (law.a > 0.0) p.law(r.kernel) = law;
  }
  // OFDM (de)modulation is one FFT per symbol.
  p.law(KernelKind::OfdmModulate) = p.law(KernelKind::Fft);
  p.law(KernelKind::OfdmDemodulate) = p.law(KernelKind::Fft);
  return p;
}

}  // namespace wbpsim
