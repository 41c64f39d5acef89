#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace wbpsim;
using namespace wbpsim::cli;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  bool strict = false;
  bool lenient = false;
  bool strict_algorithm = false;
  bool no_mt = false;
  bool no_ld = false;
  std::optional<std::string> out;

  void attach(CLI::App& cmd) {
    cmd.add_option("--seed", seed, "Override [run] seed");
    auto* s = cmd.add_flag("--strict", strict, "Abort on the first protocol violation");
    cmd.add_flag("--lenient", lenient, "Count protocol violations instead of aborting")->excludes(s);
    cmd.add_flag("--strict-algorithm", strict_algorithm, "Skip registration on the thread-manager admission path");
    cmd.add_flag("--no-multithreading", no_mt, "One thread per cluster");
    cmd.add_flag("--no-lazy-deletion", no_ld, "Free DAG code when its thread ends");
    cmd.add_option("--out", out, "CSV output path (default: stdout)");
  }

  void apply(RunConfig& rc) const {
    if (seed) rc.experiment.seed = *seed;
    if (strict) rc.experiment.machine.strict = true;
    if (lenient) rc.experiment.machine.strict = false;
    if (strict_algorithm) rc.experiment.flags.strict_algorithm = true;
    if (no_mt) rc.experiment.flags.multithreading = false;
    if (no_ld) rc.experiment.flags.lazy_deletion = false;
  }
};

RunConfig load(const std::string& path, const Overrides& o) {
  RunConfig rc = load_config(path);
  o.apply(rc);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wbpsim: cycle-approximate simulator of a hierarchical dataflow baseband accelerator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string anchors_path;
  std::optional<std::string> trace;
  std::string grid_text;
  bool inject = false;

  Overrides run_o, sweep_o, abl_o, cal_o;

  auto* run = app.add_subcommand("run", "Run one experiment and write a CSV row");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--trace", trace, "Write the JSON-lines event trace here");
  run->add_flag("--inject-violation", inject)->group("");
  run_o.attach(*run);

  auto* sweep = app.add_subcommand("sweep", "Run the clusters x tiles grid");
  sweep->add_option("config", config_path, "Config file")->required();
  sweep->add_option("--grid", grid_text, "Grid, e.g. \"clusters=4,5;tiles=3-9\"");
  sweep_o.attach(*sweep);

  auto* abl = app.add_subcommand("ablation", "Single-level vs multi-level with and without MT/LD");
  abl->add_option("config", config_path, "Config file")->required();
  abl_o.attach(*abl);

  auto* cal = app.add_subcommand("calibrate", "Fit the cost model to an anchor table");
  cal->add_option("anchors", anchors_path, "Anchor table (kernel,size,cycles,ref_lanes)")->required();
  cal->add_option("--out", cal_o.out, "CSV output path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  const std::string& where = app.got_subcommand(cal) ? anchors_path : config_path;
  try {
    if (app.got_subcommand(run)) {
      RunConfig rc = load(config_path, run_o);
      rc.experiment.inject_violation = inject;
      return cmd_run(rc, run_o.out, trace, run_o.out ? std::cout : std::cerr);
    }
    if (app.got_subcommand(sweep)) {
      const RunConfig rc = load(config_path, sweep_o);
      const GridSpec grid = grid_text.empty() ? GridSpec{} : parse_grid(grid_text);
      return cmd_sweep(rc, grid, sweep_o.out, sweep_o.out ? std::cout : std::cerr);
    }
    if (app.got_subcommand(abl)) {
      const RunConfig rc = load(config_path, abl_o);
      return cmd_ablation(rc, abl_o.out, abl_o.out ? std::cout : std::cerr);
    }
    return cmd_calibrate(anchors_path, cal_o.out, cal_o.out ? std::cout : std::cerr);
  } catch (const ParseError& e) {
    std::cerr << where << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 1;
}
