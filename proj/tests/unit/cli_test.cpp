#include <gtest/gtest.h>

#include <sstream>

#include "commands.hpp"
#include "config.hpp"

using namespace wbpsim;
using namespace wbpsim::cli;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, WBPSIM_DATA_DIR);
}

// Minimal RFC 4180 reader for one CRLF-terminated record read by getline.
std::vector<std::string> split_record(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace

TEST(Config, ZeroClustersNamesTheKey) {
  try {
    parse("[system]\nclusters = 0\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("clusters"), std::string::npos) << e.what();
  }
}

TEST(Config, UnknownKeyReportsLine) {
  try {
    parse("# header\n[system]\nclusters = 2\nwarp = 9\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  EXPECT_THROW(parse("clusters = 2\n"), ParseError);
  EXPECT_THROW(parse("[system]\nclusters = two\n"), ParseError);
}

TEST(Config, ShippedThreeClusterFile) {
  const RunConfig rc = load_config(WBPSIM_DATA_DIR "/3c4t.cfg");
  const auto& m = rc.experiment.machine;
  EXPECT_EQ(m.clusters, 3u);
  EXPECT_EQ(m.tile_mix.size(), 4u);
  EXPECT_EQ(m.l_tiles(), 2u);
  EXPECT_EQ(m.max_threads, 2u);
  EXPECT_EQ(rc.experiment.link.users_per_slot, 5u);
  EXPECT_EQ(rc.experiment.slots, 120u);
  EXPECT_THROW(load_config(WBPSIM_DATA_DIR "/missing.cfg"), std::runtime_error);
}

TEST(Config, EchoRoundTrips) {
  RunConfig rc = load_config(WBPSIM_DATA_DIR "/3c4t.cfg");
  rc.experiment.link.snr_db = 7.5;
  rc.experiment.flags.lazy_deletion = false;
  const std::string echoed = echo_config(rc);
  const RunConfig back = parse(echoed);
  EXPECT_EQ(echo_config(back), echoed);
  EXPECT_EQ(back.experiment.link.snr_db, 7.5);
  EXPECT_FALSE(back.experiment.flags.lazy_deletion);
}

TEST(Csv, EmptyRowsGiveHeaderOnly) {
  std::ostringstream out;
  write_csv(out, {});
  std::string expect;
  for (std::size_t i = 0; i < csv_header().size(); ++i) expect += (i ? "," : "") + csv_header()[i];
  EXPECT_EQ(out.str(), expect + "\r\n");
}

TEST(Csv, Escaping) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");
}

TEST(Csv, RewriteIsByteIdenticalAndParsesBack) {
  CsvRow r;
  r.config_id = "c3,t4";
  r.clusters = 3;
  r.tiles = 4;
  r.throughput_mbps = 11.375;
  r.digest = "00ff";
  std::ostringstream a, b;
  write_csv(a, {r, r});
  write_csv(b, {r, r});
  EXPECT_EQ(a.str(), b.str());

  std::istringstream in(a.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(split_record(line), csv_header());
  std::getline(in, line);
  const auto fields = split_record(line);
  ASSERT_EQ(fields.size(), csv_header().size());
  EXPECT_EQ(fields, csv_fields(r));
  EXPECT_EQ(fields[0], "c3,t4");
}

TEST(Grid, Parse) {
  const GridSpec d;
  EXPECT_EQ(d.clusters.size() * d.tiles.size(), 14u);
  const auto g = parse_grid("clusters=2,3;tiles=4-6");
  EXPECT_EQ(g.clusters, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(g.tiles, (std::vector<std::size_t>{4, 5, 6}));
  EXPECT_EQ(parse_grid("tiles=5").clusters, d.clusters);
  EXPECT_THROW(parse_grid("cores=4"), std::invalid_argument);
  EXPECT_THROW(parse_grid("tiles="), std::invalid_argument);
  EXPECT_THROW(parse_grid("tiles"), std::invalid_argument);
}

TEST(Grid, SweepPointsClustersMajor) {
  ExperimentConfig base;
  const auto pts = sweep_points(base, parse_grid("clusters=4,5;tiles=3,4"));
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts[1].clusters, 4u);
  EXPECT_EQ(pts[1].tiles, 4u);
  EXPECT_EQ(pts[2].clusters, 5u);
  EXPECT_EQ(pts[0].config.machine.tile_mix, default_tile_mix(3));
  EXPECT_EQ(default_tile_mix(3), (std::vector<TileClass>{TileClass::Large, TileClass::Large, TileClass::Small}));
}

TEST(Ablation, SixVariants) {
  const RunConfig rc = load_config(WBPSIM_DATA_DIR "/3c4t.cfg");
  const auto v = ablation_variants(rc.experiment);
  ASSERT_EQ(v.size(), 6u);
  std::size_t flat = 0;
  for (const auto& a : v) {
    if (!a.hierarchical) {
      ++flat;
      EXPECT_EQ(a.config.machine.clusters, 1u);
      EXPECT_EQ(a.config.machine.tile_mix.size(), 12u);
    }
    EXPECT_TRUE(!a.lazy_deletion || a.multithreading);
  }
  EXPECT_EQ(flat, 3u);
}

TEST(Sweep, Summary) {
  std::vector<CsvRow> rows(4);
  rows[0].clusters = 4;
  rows[0].throughput_mbps = 10;
  rows[1].clusters = 4;
  rows[1].throughput_mbps = 20;
  rows[2].clusters = 5;
  rows[2].throughput_mbps = 18;
  rows[3].clusters = 5;
  rows[3].throughput_mbps = 24;
  rows[3].config_id = "best";
  const auto s = summarize_sweep(rows);
  ASSERT_TRUE(s.has_ratio);
  EXPECT_DOUBLE_EQ(s.mean_ratio, 21.0 / 15.0);
  EXPECT_EQ(s.peak_id, "best");
  EXPECT_DOUBLE_EQ(s.peak_mbps, 24.0);
}
