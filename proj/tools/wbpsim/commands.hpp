#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace wbpsim::cli {

struct CsvRow {
  std::string config_id;
  std::size_t clusters = 0;
  std::size_t tiles = 0;
  std::size_t l_tiles = 0;
  std::size_t s_tiles = 0;
  std::size_t slots = 0;
  std::uint64_t seed = 0;
  bool mt = true;
  bool ld = true;
  double throughput_mbps = 0.0;
  double tile_util = 0.0;
  std::uint64_t dma_bytes = 0;
  std::uint64_t dag_transfers = 0;
  std::uint64_t evictions = 0;
  std::uint64_t residency_hits = 0;
  std::uint64_t dismissed_tasks = 0;
  std::string digest;
};

const std::vector<std::string>& csv_header();
/// RFC 4180: quote when the field holds a comma, quote, CR or LF; double
/// embedded quotes.
std::string csv_escape(std::string_view field);
std::vector<std::string> csv_fields(const CsvRow& row);
void write_csv(std::ostream& out, const std::vector<CsvRow>& rows);
/// Writes to `path`; throws std::runtime_error naming the path on failure.
void emit_csv(const std::vector<CsvRow>& rows, const std::string& path);

CsvRow make_row(std::string config_id, const ExperimentConfig& cfg, const ThroughputReport& rep);

struct GridSpec {
  std::vector<std::size_t> clusters{4, 5};
  std::vector<std::size_t> tiles{3, 4, 5, 6, 7, 8, 9};
};

/// "clusters=4,5;tiles=3-9". Omitted dimensions keep the defaults. Throws
/// std::invalid_argument on malformed input or an empty dimension.
GridSpec parse_grid(std::string_view text);

/// Runs the experiments on up to `workers` threads; results come back in
/// input order.
std::vector<ThroughputReport> run_all(const std::vector<ExperimentConfig>& configs, std::size_t workers);

/// WBPSIM_WORKERS if set and positive, else the hardware concurrency.
std::size_t workers_from_env();

struct SweepPoint {
  std::size_t clusters = 0;
  std::size_t tiles = 0;
  ExperimentConfig config;
};
/// Cartesian product, clusters major; tile mix = ceil(t/2) L then S.
std::vector<SweepPoint> sweep_points(const ExperimentConfig& base, const GridSpec& grid);

struct SweepSummary {
  double mean_ratio = 0.0;  ///< mean over 5-cluster rows / mean over 4-cluster rows
  bool has_ratio = false;
  double peak_mbps = 0.0;
  std::string peak_id;
};
SweepSummary summarize_sweep(const std::vector<CsvRow>& rows);

struct AblationVariant {
  std::string id;
  bool hierarchical = true;
  bool multithreading = false;
  bool lazy_deletion = false;
  ExperimentConfig config;
};
/// {baseline, +MT, +MT+LD} for the flat single-level system and the
/// hierarchical system described by `base`. The flat system has all of the
/// base system's tiles in one cluster driven by the main scheduler, with the
/// thread bound and shared sections scaled by the cluster count.
std::vector<AblationVariant> ablation_variants(const ExperimentConfig& base);

/// Command bodies; return the process exit status.
int cmd_run(const RunConfig& rc, const std::optional<std::string>& out, const std::optional<std::string>& trace,
            std::ostream& log);
int cmd_sweep(const RunConfig& rc, const GridSpec& grid, const std::optional<std::string>& out, std::ostream& log);
int cmd_ablation(const RunConfig& rc, const std::optional<std::string>& out, std::ostream& log);
int cmd_calibrate(const std::string& anchors_path, const std::optional<std::string>& out, std::ostream& log);

}  // namespace wbpsim::cli
