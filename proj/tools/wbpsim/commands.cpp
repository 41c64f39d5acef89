#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

namespace wbpsim::cli {

namespace {

// Reported next to the sweep results for comparison.
constexpr double kReferenceClusterRatio = 1.23;
constexpr double kReferencePeakMbps = 288.0;
constexpr double kPeakBand = 0.30;

std::string fmt_mbps(double x) { return fmt::format("{:.4f}", x); }

std::size_t parse_count(std::string_view s) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || v == 0) {
    throw std::invalid_argument("grid: expected a positive integer, got '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::size_t> parse_list(std::string_view s) {
  std::vector<std::size_t> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const std::string_view item = s.substr(0, comma);
    if (const auto dash = item.find('-'); dash != std::string_view::npos) {
      const auto lo = parse_count(item.substr(0, dash));
      const auto hi = parse_count(item.substr(dash + 1));
      if (hi < lo) throw std::invalid_argument("grid: empty range '" + std::string(item) + "'");
      for (auto v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(parse_count(item));
    }
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  if (out.empty()) throw std::invalid_argument("grid: empty dimension");
  return out;
}

void write_sidecar(const std::string& out, const RunConfig& rc) {
  std::ofstream f(out + ".cfg");
  if (!f) throw std::runtime_error("cannot write '" + out + ".cfg'");
  f << echo_config(rc);
}

void emit(const std::vector<CsvRow>& rows, const std::optional<std::string>& out) {
  if (out) {
    emit_csv(rows, *out);
  } else {
    write_csv(std::cout, rows);
  }
}

}  // namespace

const std::vector<std::string>& csv_header() {
  static const std::vector<std::string> h{"config_id",      "clusters",   "tiles",     "l_tiles",       "s_tiles",
                                          "slots",          "seed",       "mt",        "ld",            "throughput_mbps",
                                          "tile_util",      "dma_bytes",  "dag_transfers", "evictions", "residency_hits",
                                          "dismissed_tasks", "digest"};
  return h;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_fields(const CsvRow& r) {
  return {r.config_id,
          std::to_string(r.clusters),
          std::to_string(r.tiles),
          std::to_string(r.l_tiles),
          std::to_string(r.s_tiles),
          std::to_string(r.slots),
          std::to_string(r.seed),
          r.mt ? "1" : "0",
          r.ld ? "1" : "0",
          fmt_mbps(r.throughput_mbps),
          fmt::format("{:.6f}", r.tile_util),
          std::to_string(r.dma_bytes),
          std::to_string(r.dag_transfers),
          std::to_string(r.evictions),
          std::to_string(r.residency_hits),
          std::to_string(r.dismissed_tasks),
          r.digest};
}

void write_csv(std::ostream& out, const std::vector<CsvRow>& rows) {
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(fields[i]);
    }
    out << "\r\n";
  };
  line(csv_header());
  for (const auto& r : rows) line(csv_fields(r));
}

void emit_csv(const std::vector<CsvRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write CSV file '" + path + "'");
  write_csv(f, rows);
  if (!f) throw std::runtime_error("error while writing CSV file '" + path + "'");
}

CsvRow make_row(std::string config_id, const ExperimentConfig& cfg, const ThroughputReport& rep) {
  CsvRow r;
  r.config_id = std::move(config_id);
  r.clusters = cfg.machine.clusters;
  r.tiles = cfg.machine.tile_mix.size();
  r.l_tiles = cfg.machine.l_tiles();
  r.s_tiles = cfg.machine.s_tiles();
  r.slots = cfg.slots;
  r.seed = cfg.seed;
  r.mt = cfg.flags.multithreading;
  r.ld = cfg.flags.lazy_deletion;
  r.throughput_mbps = rep.throughput_mbps;
  r.tile_util = rep.mean_tile_utilization;
  r.dma_bytes = rep.dma_bytes;
  r.dag_transfers = rep.metrics.dag_transfers;
  r.evictions = rep.metrics.evictions;
  r.residency_hits = rep.metrics.residency_hits;
  r.dismissed_tasks = rep.metrics.dismissed_tasks;
  r.digest = digest_hex(rep.digest);
  return r;
}

GridSpec parse_grid(std::string_view text) {
  GridSpec g;
  while (!text.empty()) {
    const auto semi = text.find(';');
    std::string_view part = text.substr(0, semi);
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("grid: expected name=values");
    const auto name = part.substr(0, eq);
    if (name == "clusters") {
      g.clusters = parse_list(part.substr(eq + 1));
    } else if (name == "tiles") {
      g.tiles = parse_list(part.substr(eq + 1));
    } else {
      throw std::invalid_argument("grid: unknown dimension '" + std::string(name) + "'");
    }
    if (semi == std::string_view::npos) break;
    text.remove_prefix(semi + 1);
  }
  return g;
}

std::size_t workers_from_env() {
  if (const char* env = std::getenv("WBPSIM_WORKERS")) {
    std::size_t v = 0;
    const std::string_view s(env);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc{} && p == s.data() + s.size() && v > 0) return v;
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

std::vector<ThroughputReport> run_all(const std::vector<ExperimentConfig>& configs, std::size_t workers) {
  std::vector<ThroughputReport> out(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        out[i] = run_experiment(configs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, configs.size()));
  std::vector<std::jthread> pool;
  for (std::size_t i = 1; i < n; ++i) pool.emplace_back(work);
  work();
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& base, const GridSpec& grid) {
  if (grid.clusters.empty() || grid.tiles.empty()) throw std::invalid_argument("grid must not be empty");
  std::vector<SweepPoint> pts;
  for (auto c : grid.clusters) {
    for (auto t : grid.tiles) {
      SweepPoint p{c, t, base};
      p.config.machine.clusters = c;
      p.config.machine.tile_mix = default_tile_mix(t);
      pts.push_back(std::move(p));
    }
  }
  return pts;
}

SweepSummary summarize_sweep(const std::vector<CsvRow>& rows) {
  SweepSummary s;
  double sum4 = 0.0, sum5 = 0.0;
  std::size_t n4 = 0, n5 = 0;
  for (const auto& r : rows) {
    if (r.clusters == 4) {
      sum4 += r.throughput_mbps;
      ++n4;
    } else if (r.clusters == 5) {
      sum5 += r.throughput_mbps;
      ++n5;
    }
    if (r.throughput_mbps > s.peak_mbps) {
      s.peak_mbps = r.throughput_mbps;
      s.peak_id = r.config_id;
    }
  }
  if (n4 && n5 && sum4 > 0) {
    s.has_ratio = true;
    s.mean_ratio = (sum5 / static_cast<double>(n5)) / (sum4 / static_cast<double>(n4));
  }
  return s;
}

std::vector<AblationVariant> ablation_variants(const ExperimentConfig& base) {
  struct Flags {
    const char* name;
    bool mt, ld;
  };
  constexpr Flags kFlags[] = {{"base", false, false}, {"mt", true, false}, {"mt-ld", true, true}};

  ExperimentConfig flat = base;
  const std::size_t c = base.machine.clusters;
  flat.machine.clusters = 1;
  flat.machine.hierarchical = false;
  flat.machine.tile_mix.clear();
  for (std::size_t i = 0; i < c; ++i) {
    flat.machine.tile_mix.insert(flat.machine.tile_mix.end(), base.machine.tile_mix.begin(), base.machine.tile_mix.end());
  }
  flat.machine.max_threads = base.machine.max_threads * c;
  for (auto& s : flat.machine.section_bytes) s *= c;

  std::vector<AblationVariant> out;
  for (bool hier : {false, true}) {
    for (const auto& f : kFlags) {
      AblationVariant v;
      v.id = std::string(hier ? "hier-" : "flat-") + f.name;
      v.hierarchical = hier;
      v.multithreading = f.mt;
      v.lazy_deletion = f.ld;
      v.config = hier ? base : flat;
      v.config.flags.multithreading = f.mt;
      v.config.flags.lazy_deletion = f.ld;
      out.push_back(std::move(v));
    }
  }
  return out;
}

int cmd_run(const RunConfig& rc, const std::optional<std::string>& out, const std::optional<std::string>& trace,
            std::ostream& log) {
  ExperimentConfig cfg = rc.experiment;
  log << echo_config(rc) << '\n';
  std::ofstream trace_file;
  if (trace) {
    trace_file.open(*trace, std::ios::binary);
    if (!trace_file) throw std::runtime_error("cannot write trace file '" + *trace + "'");
    cfg.trace = &trace_file;
  }

  ThroughputReport rep;
  try {
    rep = run_experiment(cfg);
  } catch (const ProtocolViolation& e) {
    log << "error: protocol violation: " << e.what() << '\n';
    return 3;
  }

  const auto row = make_row("run", cfg, rep);
  emit({row}, out);
  if (out) write_sidecar(*out, rc);

  log << fmt::format("throughput_mbps = {} (uplink info bits of completed receive threads)\n",
                     fmt_mbps(rep.throughput_mbps))
      << fmt::format("downlink_mbps = {}\n", fmt_mbps(rep.tx_throughput_mbps))
      << fmt::format("simulated_cycles = {}\n", rep.simulated_cycles)
      << fmt::format("tile_util = {:.4f}\n", rep.mean_tile_utilization)
      << fmt::format("events = {} digest = {}\n", rep.events, digest_hex(rep.digest))
      << fmt::format("fidelity_checked = {} fidelity_failures = {} bit_errors = {}\n", rep.fidelity_checked,
                     rep.fidelity_failures, rep.bit_errors)
      << fmt::format("port_violations = {} spm_overlaps = {} causality_violations = {}\n", rep.port_violations,
                     rep.spm_overlaps, rep.causality_violations);
  if (rep.fidelity_failures) {
    log << "error: functional fidelity check failed\n";
    return 2;
  }
  if (rep.port_violations || rep.spm_overlaps || rep.causality_violations) {
    log << "warning: protocol violations recorded in lenient mode\n";
  }
  return 0;
}

int cmd_sweep(const RunConfig& rc, const GridSpec& grid, const std::optional<std::string>& out, std::ostream& log) {
  log << echo_config(rc) << '\n';
  const auto points = sweep_points(rc.experiment, grid);
  std::vector<ExperimentConfig> configs;
  for (const auto& p : points) configs.push_back(p.config);
  const auto reports = run_all(configs, workers_from_env());

  std::vector<CsvRow> rows;
  bool fidelity_ok = true;
  for (std::size_t i = 0; i < points.size(); ++i) {
    rows.push_back(make_row(fmt::format("c{}t{}", points[i].clusters, points[i].tiles), points[i].config, reports[i]));
    fidelity_ok = fidelity_ok && reports[i].fidelity_failures == 0;
  }
  emit(rows, out);
  if (out) write_sidecar(*out, rc);

  const auto s = summarize_sweep(rows);
  if (s.has_ratio) {
    log << fmt::format("cluster_ratio (mean 5C / mean 4C) = {:.4f} (reference {:.2f})\n", s.mean_ratio,
                       kReferenceClusterRatio);
  }
  const double dev = (s.peak_mbps - kReferencePeakMbps) / kReferencePeakMbps;
  log << fmt::format("peak = {} Mbps at {} (reference {:.0f} Mbps, deviation {:+.1f}%{})\n", fmt_mbps(s.peak_mbps),
                     s.peak_id, kReferencePeakMbps, 100.0 * dev, std::abs(dev) <= kPeakBand ? "" : ", outside +-30% band");
  if (!fidelity_ok) {
    log << "error: functional fidelity check failed\n";
    return 2;
  }
  return 0;
}

int cmd_ablation(const RunConfig& rc, const std::optional<std::string>& out, std::ostream& log) {
  log << echo_config(rc) << '\n';
  const auto variants = ablation_variants(rc.experiment);
  std::vector<ExperimentConfig> configs;
  for (const auto& v : variants) configs.push_back(v.config);
  const auto reports = run_all(configs, workers_from_env());

  std::vector<CsvRow> rows;
  bool fidelity_ok = true;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    rows.push_back(make_row(variants[i].id, variants[i].config, reports[i]));
    fidelity_ok = fidelity_ok && reports[i].fidelity_failures == 0;
  }
  emit(rows, out);
  if (out) write_sidecar(*out, rc);

  log << fmt::format("{:<14}{:>14}{:>14}{:>10}\n", "variant", "single-level", "multi-level", "ratio");
  const char* names[] = {"baseline", "+mt", "+mt+ld"};
  for (std::size_t i = 0; i < 3; ++i) {
    const double f = reports[i].throughput_mbps;
    const double h = reports[i + 3].throughput_mbps;
    log << fmt::format("{:<14}{:>14.4f}{:>14.4f}{:>10.3f}\n", names[i], f, h, f > 0 ? h / f : 0.0);
  }
  if (!fidelity_ok) {
    log << "error: functional fidelity check failed\n";
    return 2;
  }
  return 0;
}

int cmd_calibrate(const std::string& anchors_path, const std::optional<std::string>& out, std::ostream& log) {
  const auto anchors = load_anchor_file(anchors_path);
  const CostParams params = build_cost_params(anchors);
  const auto fits = fit_scaling(anchors);

  std::ostringstream csv;
  csv << "kernel,size,ref_lanes,anchor_cycles,model_cycles,fit_cycles,fit_residual,large_tile_cycles,small_tile_cycles\r\n";
  for (const auto& a : anchors) {
    const TileTiming ref{a.ref_lanes, 32, 500e6};
    const auto model = kernel_cycles(a.kernel, a.size, ref, params);
    const double fit = params.law(a.kernel).eval(a.size);
    csv << fmt::format("{},{},{},{},{},{:.2f},{:.6f},{},{}\r\n", to_string(a.kernel), a.size, a.ref_lanes, a.cycles,
                       model, fit, (fit - static_cast<double>(a.cycles)) / static_cast<double>(a.cycles),
                       kernel_cycles(a.kernel, a.size, kLargeTile, params),
                       kernel_cycles(a.kernel, a.size, kSmallTile, params));
  }
  if (out) {
    std::ofstream f(*out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write CSV file '" + *out + "'");
    f << csv.str();
  } else {
    std::cout << csv.str();
  }
  for (const auto& f : fits) {
    log << fmt::format("{}: cycles(N) = {:.6f} * N log2 N + {:.3f}\n", to_string(f.kernel), f.law.a, f.law.b);
  }
  return 0;
}

}  // namespace wbpsim::cli
