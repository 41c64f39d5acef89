#include "config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace wbpsim::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t to_uint(const std::string& key, const std::string& v, std::size_t line) {
  std::uint64_t out = 0;
  int base = 10;
  std::string_view sv = v;
  if (sv.starts_with("0x") || sv.starts_with("0X")) {
    base = 16;
    sv.remove_prefix(2);
  }
  auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), out, base);
  if (ec != std::errc{} || p != sv.data() + sv.size() || sv.empty()) {
    throw ParseError(line, key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_positive(const std::string& key, const std::string& v, std::size_t line) {
  const auto x = to_uint(key, v, line);
  if (x == 0) throw ParseError(line, key + ": must be > 0");
  return x;
}

double to_double(const std::string& key, const std::string& v, std::size_t line) {
  if (v == "inf" || v == "+inf") return kNoiselessSnr;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || std::isnan(x)) {
    throw ParseError(line, key + ": expected a number, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v, std::size_t line) {
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw ParseError(line, key + ": expected true/false, got '" + v + "'");
}

std::vector<TileClass> to_mix(const std::string& key, const std::string& v, std::size_t line) {
  std::vector<TileClass> out;
  for (char c : v) {
    if (c == ',' || c == ' ') continue;
    if (c == 'L' || c == 'l') {
      out.push_back(TileClass::Large);
    } else if (c == 'S' || c == 's') {
      out.push_back(TileClass::Small);
    } else {
      throw ParseError(line, key + ": tile classes are L or S");
    }
  }
  if (out.empty()) throw ParseError(line, key + ": must list at least one tile");
  return out;
}

std::string fmt_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{}", x);
}

const char* fmt_bool(bool b) { return b ? "true" : "false"; }

std::string fmt_mix(const std::vector<TileClass>& mix) {
  std::string s;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    if (i) s += ',';
    s += mix[i] == TileClass::Large ? 'L' : 'S';
  }
  return s;
}

using Setter = std::function<void(RunConfig&, const std::string&, std::size_t)>;

std::size_t& section(RunConfig& rc, SectionKind k) {
  return rc.experiment.machine.section_bytes[static_cast<std::size_t>(k)];
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    // [system]
    m["system.clusters"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.clusters = to_positive("clusters", v, ln);
    };
    m["system.tiles"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.tile_mix = default_tile_mix(to_positive("tiles", v, ln));
    };
    m["system.tile_mix"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.tile_mix = to_mix("tile_mix", v, ln);
    };
    m["system.tspm_bytes"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.tspm_bytes = to_positive("tspm_bytes", v, ln);
    };
    m["system.code_pool_bytes"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      section(rc, SectionKind::TaskCodePool) = to_positive("code_pool_bytes", v, ln);
    };
    m["system.fifo_bytes"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      section(rc, SectionKind::FifoLists) = to_positive("fifo_bytes", v, ln);
    };
    m["system.load_indication_bytes"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      section(rc, SectionKind::LoadIndication) = to_positive("load_indication_bytes", v, ln);
    };
    m["system.compute_data_bytes"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      section(rc, SectionKind::ComputeData) = to_positive("compute_data_bytes", v, ln);
    };
    m["system.max_threads"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.max_threads = to_positive("max_threads", v, ln);
    };
    m["system.hierarchical"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.hierarchical = to_bool("hierarchical", v, ln);
    };
    m["system.large_lanes"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.large.lanes = static_cast<unsigned>(to_positive("large_lanes", v, ln));
    };
    m["system.large_vrfs"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.large.vrf_count = static_cast<unsigned>(to_positive("large_vrfs", v, ln));
    };
    m["system.small_lanes"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.small.lanes = static_cast<unsigned>(to_positive("small_lanes", v, ln));
    };
    m["system.small_vrfs"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.small.vrf_count = static_cast<unsigned>(to_positive("small_vrfs", v, ln));
    };
    m["system.clock_hz"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      const double hz = to_double("clock_hz", v, ln);
      if (!(hz > 0) || std::isinf(hz)) throw ParseError(ln, "clock_hz: must be > 0");
      rc.experiment.machine.large.clock_hz = hz;
      rc.experiment.machine.small.clock_hz = hz;
    };
    m["system.dma_setup_cycles"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.dma.setup_cycles = to_uint("dma_setup_cycles", v, ln);
    };
    m["system.dma_bytes_per_cycle"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.dma.bytes_per_cycle = to_positive("dma_bytes_per_cycle", v, ln);
    };
    m["system.csr_cycles"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.dma.csr_write_cycles = to_positive("csr_cycles", v, ln);
    };
    m["system.thread_eval_cycles"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.sched.thread_eval_cycles = to_uint("thread_eval_cycles", v, ln);
    };
    m["system.scan_node_cycles"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.sched.scan_node_cycles = to_uint("scan_node_cycles", v, ln);
    };
    m["system.tick_cycles"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.sched.tick_cycles = to_positive("tick_cycles", v, ln);
    };
    m["system.scratch_reserve_bytes"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.scratch_reserve_bytes = to_uint("scratch_reserve_bytes", v, ln);
    };
    // [link]
    m["link.N"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.link.N = to_positive("N", v, ln);
    };
    m["link.K"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.link.K = to_positive("K", v, ln);
    };
    m["link.E"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.link.E = to_positive("E", v, ln);
    };
    m["link.c_init"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      const auto x = to_uint("c_init", v, ln);
      if (x > 0x7fffffffU) throw ParseError(ln, "c_init: must fit in 31 bits");
      rc.experiment.link.c_init = static_cast<std::uint32_t>(x);
    };
    m["link.subcarriers"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.link.ofdm.n_subcarriers = to_positive("subcarriers", v, ln);
    };
    m["link.cp_len"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.link.ofdm.cp_len = to_uint("cp_len", v, ln);
    };
    m["link.bp_iters"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.link.bp_iters = static_cast<unsigned>(to_positive("bp_iters", v, ln));
    };
    m["link.bp_early_exit"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.link.bp_early_exit = to_bool("bp_early_exit", v, ln);
    };
    m["link.users_per_slot"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      const auto x = to_uint("users_per_slot", v, ln);
      if (x > kMaxUsersPerSlot) throw ParseError(ln, "users_per_slot: must be <= 20");
      rc.experiment.link.users_per_slot = x;
    };
    m["link.snr_db"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.link.snr_db = to_double("snr_db", v, ln);
    };
    m["link.design_snr_db"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.link.design_snr_db = to_double("design_snr_db", v, ln);
    };
    m["link.pilot_seed"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      const auto x = to_uint("pilot_seed", v, ln);
      if (x > 0x7fffffffU) throw ParseError(ln, "pilot_seed: must fit in 31 bits");
      rc.experiment.link.pilot_seed = static_cast<std::uint32_t>(x);
    };
    m["link.gain_re"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.link.gain.real(to_double("gain_re", v, ln));
    };
    m["link.gain_im"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.link.gain.imag(to_double("gain_im", v, ln));
    };
    // [tdd]
    m["tdd.pattern"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      try {
        rc.experiment.tdd.slots = parse_pattern(v);
      } catch (const std::invalid_argument& e) {
        throw ParseError(ln, std::string("pattern: ") + e.what());
      }
    };
    m["tdd.slot_cycles"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.tdd.slot_cycles = to_positive("slot_cycles", v, ln);
    };
    // [cost]
    m["cost.anchors"] = [](RunConfig& rc, const std::string& v, std::size_t) { rc.anchors_path = v; };
    m["cost.ref_lanes"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.ref_lanes_override = static_cast<unsigned>(to_uint("ref_lanes", v, ln));
    };
    m["cost.serial_fraction"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      const double sf = to_double("serial_fraction", v, ln);
      if (!(sf >= 0.0 && sf <= 1.0)) throw ParseError(ln, "serial_fraction: must be within [0, 1]");
      rc.serial_fraction = sf;
    };
    m["cost.bp_anchor_iters"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.cost.bp_anchor_iters = static_cast<unsigned>(to_positive("bp_anchor_iters", v, ln));
    };
    // [run]
    m["run.slots"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.slots = to_positive("slots", v, ln);
    };
    m["run.seed"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.seed = to_uint("seed", v, ln);
    };
    m["run.multithreading"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.flags.multithreading = to_bool("multithreading", v, ln);
    };
    m["run.lazy_deletion"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.flags.lazy_deletion = to_bool("lazy_deletion", v, ln);
    };
    m["run.strict"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.machine.strict = to_bool("strict", v, ln);
    };
    m["run.strict_algorithm"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.flags.strict_algorithm = to_bool("strict_algorithm", v, ln);
    };
    m["run.verify_snr_db"] = [](RunConfig& rc, const std::string& v, std::size_t ln) {
      rc.experiment.verify_snr_db = to_double("verify_snr_db", v, ln);
    };
    return m;
  }();
  return table;
}

}  // namespace

std::vector<TileClass> default_tile_mix(std::size_t tiles) {
  std::vector<TileClass> mix(tiles, TileClass::Small);
  for (std::size_t i = 0; i < (tiles + 1) / 2; ++i) mix[i] = TileClass::Large;
  return mix;
}

RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  RunConfig rc;
  std::string sect;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  std::size_t tiles = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError(line_no, "unterminated section header");
      sect = trim(std::string_view(t).substr(1, t.size() - 2));
      if (sect != "system" && sect != "link" && sect != "tdd" && sect != "cost" && sect != "run") {
        throw ParseError(line_no, "unknown section [" + sect + "]");
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    if (sect.empty()) throw ParseError(line_no, "key outside of a section");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const std::string full = sect + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) throw ParseError(line_no, "unknown key '" + key + "' in [" + sect + "]");
    if (seen.contains(full)) throw ParseError(line_no, "duplicate key '" + key + "'");
    seen[full] = line_no;
    if (full == "system.tiles") tiles = to_positive("tiles", value, line_no);
    it->second(rc, value, line_no);
  }

  // `tiles` and `tile_mix` may both be given, in any order; they must agree.
  if (seen.contains("system.tiles") && seen.contains("system.tile_mix")) {
    const std::size_t ln = std::max(seen["system.tiles"], seen["system.tile_mix"]);
    if (seen["system.tiles"] > seen["system.tile_mix"]) {
      throw ParseError(ln, "tiles: give tile_mix after tiles, or only one of them");
    }
    if (rc.experiment.machine.tile_mix.size() != tiles) {
      throw ParseError(ln, "tile_mix: lists " + std::to_string(rc.experiment.machine.tile_mix.size()) +
                               " tiles but tiles = " + std::to_string(tiles));
    }
  }

  if (!rc.anchors_path.empty()) {
    std::filesystem::path p(rc.anchors_path);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    rc.anchors_path = p.string();
  }

  auto at = [&](const std::string& key) {
    const auto it = seen.find(key);
    return it == seen.end() ? std::size_t{0} : it->second;
  };
  try {
    rc.experiment.machine.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(at("system.clusters"), e.what());
  }
  try {
    rc.experiment.link.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(at("link.E") ? at("link.E") : at("link.N"), e.what());
  }
  try {
    rc.experiment.tdd.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(at("tdd.pattern"), e.what());
  }
  if (rc.experiment.link.users_per_slot == 0 &&
      std::find(rc.experiment.tdd.slots.begin(), rc.experiment.tdd.slots.end(), SlotKind::Downlink) !=
          rc.experiment.tdd.slots.end()) {
    throw ParseError(at("link.users_per_slot"), "users_per_slot: 0 users needs an uplink-only pattern");
  }
  try {
    rc.experiment.cost = resolve_cost(rc);
  } catch (const std::exception& e) {
    throw ParseError(at("cost.anchors"), std::string("anchors: ") + e.what());
  }
  return rc;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file '" + path.string() + "'");
  return parse_config(in, path.parent_path());
}

CostParams resolve_cost(const RunConfig& rc) {
  std::vector<CycleAnchor> anchors = rc.anchors_path.empty() ? default_anchors() : load_anchor_file(rc.anchors_path);
  if (rc.ref_lanes_override) {
    for (auto& a : anchors) a.ref_lanes = rc.ref_lanes_override;
  }
  CostParams p = build_cost_params(anchors, rc.serial_fraction);
  p.bp_anchor_iters = rc.experiment.cost.bp_anchor_iters;
  return p;
}

std::string echo_config(const RunConfig& rc) {
  const auto& e = rc.experiment;
  const auto& m = e.machine;
  const auto& l = e.link;
  auto sec = [&](SectionKind k) { return m.section_bytes[static_cast<std::size_t>(k)]; };
  std::ostringstream os;
  os << "[system]\n"
     << "clusters = " << m.clusters << "\n"
     << "tiles = " << m.tile_mix.size() << "\n"
     << "tile_mix = " << fmt_mix(m.tile_mix) << "\n"
     << "tspm_bytes = " << m.tspm_bytes << "\n"
     << "code_pool_bytes = " << sec(SectionKind::TaskCodePool) << "\n"
     << "fifo_bytes = " << sec(SectionKind::FifoLists) << "\n"
     << "load_indication_bytes = " << sec(SectionKind::LoadIndication) << "\n"
     << "compute_data_bytes = " << sec(SectionKind::ComputeData) << "\n"
     << "max_threads = " << m.max_threads << "\n"
     << "hierarchical = " << fmt_bool(m.hierarchical) << "\n"
     << "large_lanes = " << m.large.lanes << "\n"
     << "large_vrfs = " << m.large.vrf_count << "\n"
     << "small_lanes = " << m.small.lanes << "\n"
     << "small_vrfs = " << m.small.vrf_count << "\n"
     << "clock_hz = " << fmt_double(m.large.clock_hz) << "\n"
     << "dma_setup_cycles = " << m.dma.setup_cycles << "\n"
     << "dma_bytes_per_cycle = " << m.dma.bytes_per_cycle << "\n"
     << "csr_cycles = " << m.dma.csr_write_cycles << "\n"
     << "thread_eval_cycles = " << m.sched.thread_eval_cycles << "\n"
     << "scan_node_cycles = " << m.sched.scan_node_cycles << "\n"
     << "tick_cycles = " << m.sched.tick_cycles << "\n"
     << "scratch_reserve_bytes = " << e.scratch_reserve_bytes << "\n"
     << "\n[link]\n"
     << "N = " << l.N << "\n"
     << "K = " << l.K << "\n"
     << "E = " << l.E << "\n"
     << "c_init = " << l.c_init << "\n"
     << "subcarriers = " << l.ofdm.n_subcarriers << "\n"
     << "cp_len = " << l.ofdm.cp_len << "\n"
     << "bp_iters = " << l.bp_iters << "\n"
     << "bp_early_exit = " << fmt_bool(l.bp_early_exit) << "\n"
     << "users_per_slot = " << l.users_per_slot << "\n"
     << "snr_db = " << fmt_double(l.snr_db) << "\n"
     << "design_snr_db = " << fmt_double(l.design_snr_db) << "\n"
     << "pilot_seed = " << l.pilot_seed << "\n"
     << "gain_re = " << fmt_double(l.gain.real()) << "\n"
     << "gain_im = " << fmt_double(l.gain.imag()) << "\n"
     << "\n[tdd]\n"
     << "pattern = " << format_pattern(e.tdd) << "\n"
     << "slot_cycles = " << e.tdd.slot_cycles << "\n"
     << "\n[cost]\n";
  if (!rc.anchors_path.empty()) {
    os << "anchors = " << rc.anchors_path << "\n";
  } else {
    os << "# anchors = <built-in table>\n";
  }
  os << "ref_lanes = " << e.cost.ref_lanes << "\n"
     << "serial_fraction = " << fmt_double(rc.serial_fraction) << "\n"
     << "bp_anchor_iters = " << e.cost.bp_anchor_iters << "\n"
     << "\n[run]\n"
     << "slots = " << e.slots << "\n"
     << "seed = " << e.seed << "\n"
     << "multithreading = " << fmt_bool(e.flags.multithreading) << "\n"
     << "lazy_deletion = " << fmt_bool(e.flags.lazy_deletion) << "\n"
     << "strict = " << fmt_bool(m.strict) << "\n"
     << "strict_algorithm = " << fmt_bool(e.flags.strict_algorithm) << "\n"
     << "verify_snr_db = " << fmt_double(e.verify_snr_db) << "\n";
  return os.str();
}

}  // namespace wbpsim::cli
