#pragma once

#include <filesystem>
#include <istream>
#include <string>

#include "wbpsim/workload.hpp"

namespace wbpsim::cli {

/// Everything a config file controls.
struct RunConfig {
  ExperimentConfig experiment{};
  /// Anchor table used for the cost model; empty means the built-in anchors.
  std::string anchors_path;
  /// Overrides the anchors' reference lane count when non-zero.
  unsigned ref_lanes_override = 0;
  double serial_fraction = 0.2;
};

/// Parses the sectioned key=value format:
///
///   [system]  clusters tiles tile_mix tspm_bytes code_pool_bytes fifo_bytes
///             load_indication_bytes compute_data_bytes max_threads
///             hierarchical large_lanes large_vrfs small_lanes small_vrfs
///             clock_hz dma_setup_cycles dma_bytes_per_cycle csr_cycles
///             thread_eval_cycles scan_node_cycles tick_cycles
///             scratch_reserve_bytes
///   [link]    N K E c_init subcarriers cp_len bp_iters bp_early_exit
///             users_per_slot snr_db design_snr_db pilot_seed gain_re gain_im
///   [tdd]     pattern slot_cycles
///   [cost]    anchors ref_lanes serial_fraction bp_anchor_iters
///   [run]     slots seed multithreading lazy_deletion strict
///             strict_algorithm verify_snr_db
///
/// '#' starts a comment. Relative anchor paths resolve against `base_dir`.
/// Unknown keys, bad values and broken invariants throw ParseError with the
/// line number.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
/// Throws std::runtime_error naming the path when the file cannot be read.
RunConfig load_config(const std::filesystem::path& path);

/// Builds the cost parameters the config asks for.
CostParams resolve_cost(const RunConfig& rc);

/// The effective configuration with every value spelled out, in the same
/// format parse_config() reads.
std::string echo_config(const RunConfig& rc);

/// Default tile mix for `tiles` tiles: ceil(tiles/2) L tiles, then S tiles.
std::vector<TileClass> default_tile_mix(std::size_t tiles);

}  // namespace wbpsim::cli
