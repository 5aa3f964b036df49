#include <cstdint>
#include <optional>
#include <vector>

#include "core/error.hpp"
#include "core/time.hpp"
#include "doctest.h"
#include "grid/grid.hpp"
#include "helpers.hpp"
#include "io/envelope.hpp"

using namespace nestknn;
using testutil::TempDir;

namespace {

Detection det(double lat, double lon, bool precip,
              std::optional<PhaseLabel> phase,
              std::int64_t ts = 1433116800) {
  Detection d;
  static std::uint64_t next_id = 1;
  d.sample_id = next_id++;
  d.precipitating = precip;
  d.phase = phase;
  d.lat = lat;
  d.lon = lon;
  d.timestamp = ts;
  return d;
}

}  // namespace

TEST_CASE("phase indices form an ordered liquid to solid axis") {
  CHECK(phase_index(PhaseLabel::Liquid) == 0.0);
  CHECK(phase_index(PhaseLabel::Mixed) == 0.5);
  CHECK(phase_index(PhaseLabel::Solid) == 1.0);
}

TEST_CASE("season boundaries fall on whole months") {
  CHECK(season_of(parse_iso8601("2015-04-30T23:59:59Z")) == Season::Winter);
  CHECK(season_of(parse_iso8601("2015-05-01T00:00:00Z")) == Season::Summer);
  CHECK(season_of(parse_iso8601("2015-10-31T12:00:00Z")) == Season::Summer);
  CHECK(season_of(parse_iso8601("2015-11-01T00:00:00Z")) == Season::Winter);
  CHECK(season_of(parse_iso8601("2016-01-15T06:00:00Z")) == Season::Winter);

  CHECK(parse_season("winter") == Season::Winter);
  CHECK(parse_season("summer") == Season::Summer);
  CHECK(to_string(Season::Summer) == "summer");
  CHECK_THROWS_AS(parse_season("autumn"), ConfigError);
}

TEST_CASE("grid rows and columns cover the globe without spill") {
  PhaseGrid g(0.1, GridMode::Phase, std::nullopt);
  CHECK(g.row_of(-90.0) == 0);
  CHECK(g.row_of(89.99) == 1799);
  CHECK(g.row_of(90.0) == 1799);  // the exact pole folds into the last row
  CHECK(g.col_of(-180.0) == 0);
  CHECK(g.col_of(179.99) == 3599);
  CHECK(g.col_of(180.0) == 3599);

  CHECK(g.lat_of_row(0) == doctest::Approx(-89.95));
  CHECK(g.lon_of_col(0) == doctest::Approx(-179.95));
  CHECK(g.key_of(2, 3) == 2 * 3600 + 3);
  CHECK(g.row_of_key(g.key_of(7, 11)) == 7);
  CHECK(g.col_of_key(g.key_of(7, 11)) == 11);

  CHECK_THROWS_AS(g.row_of(90.01), DataError);
  CHECK_THROWS_AS(g.row_of(-90.01), DataError);
  CHECK_THROWS_AS(g.col_of(180.01), DataError);
  CHECK_THROWS_AS(PhaseGrid(0.0, GridMode::Phase, std::nullopt), ConfigError);
  CHECK_THROWS_AS(PhaseGrid(181.0, GridMode::Phase, std::nullopt),
                  ConfigError);
}

TEST_CASE("phase accumulation averages precipitating detections only") {
  std::vector<Detection> dets{
      det(45.02, -100.03, true, PhaseLabel::Solid),
      det(45.04, -100.01, true, PhaseLabel::Liquid),
      det(45.01, -100.02, false, std::nullopt),      // skipped in phase mode
      det(-33.0, 151.0, true, PhaseLabel::Mixed),
  };
  RunConfig cfg = default_config();
  PhaseGrid g = grid_accumulate(dets, 0.1, GridMode::Phase, std::nullopt, cfg);

  REQUIRE(g.cells().size() == 2);
  const auto key = g.key_of(g.row_of(45.02), g.col_of(-100.03));
  const GridCell& cell = g.cells().at(key);
  CHECK(cell.count == 2);
  CHECK(cell.mean() == doctest::Approx(0.5));  // (1.0 + 0.0) / 2
  const auto key2 = g.key_of(g.row_of(-33.0), g.col_of(151.0));
  CHECK(g.cells().at(key2).mean() == doctest::Approx(0.5));

  auto box = g.bounding_box();
  REQUIRE(box.has_value());
  CHECK(box->row_min == g.row_of(-33.0));
  CHECK(box->row_max == g.row_of(45.02));

  // A precipitating detection with no phase label is unusable here.
  std::vector<Detection> broken{det(0.0, 0.0, true, std::nullopt)};
  CHECK_THROWS_WITH_AS(
      grid_accumulate(broken, 0.1, GridMode::Phase, std::nullopt, cfg),
      doctest::Contains("without a phase"), DataError);
}

TEST_CASE("occurrence accumulation counts every detection") {
  std::vector<Detection> dets{
      det(10.0, 10.0, true, PhaseLabel::Solid),
      det(10.0, 10.0, false, std::nullopt),
      det(10.0, 10.0, false, std::nullopt),
      det(10.0, 10.0, true, PhaseLabel::Liquid),
  };
  RunConfig cfg = default_config();
  PhaseGrid g =
      grid_accumulate(dets, 1.0, GridMode::Occurrence, std::nullopt, cfg);
  REQUIRE(g.cells().size() == 1);
  const GridCell& cell = g.cells().begin()->second;
  CHECK(cell.count == 4);
  CHECK(cell.mean() == doctest::Approx(0.5));
}

TEST_CASE("season filter drops the other season") {
  const auto summer_ts = parse_iso8601("2015-07-01T00:00:00Z");
  const auto winter_ts = parse_iso8601("2015-01-01T00:00:00Z");
  std::vector<Detection> dets{
      det(0.0, 0.0, true, PhaseLabel::Solid, summer_ts),
      det(0.0, 0.0, true, PhaseLabel::Solid, winter_ts),
  };
  RunConfig cfg = default_config();
  PhaseGrid g =
      grid_accumulate(dets, 1.0, GridMode::Phase, Season::Winter, cfg);
  REQUIRE(g.cells().size() == 1);
  CHECK(g.cells().begin()->second.count == 1);
  CHECK(g.season() == Season::Winter);
}

TEST_CASE("strict windows reject out-of-window timestamps") {
  RunConfig cfg = default_config();
  cfg.window_start = parse_iso8601("2015-06-01T00:00:00Z");
  cfg.window_end = parse_iso8601("2015-07-01T00:00:00Z");
  cfg.season_strict = true;

  std::vector<Detection> inside{
      det(0.0, 0.0, true, PhaseLabel::Solid, *cfg.window_start)};
  CHECK_NOTHROW(
      grid_accumulate(inside, 1.0, GridMode::Phase, std::nullopt, cfg));

  // The window end is exclusive.
  std::vector<Detection> at_end{
      det(0.0, 0.0, true, PhaseLabel::Solid, *cfg.window_end)};
  CHECK_THROWS_WITH_AS(
      grid_accumulate(at_end, 1.0, GridMode::Phase, std::nullopt, cfg),
      doctest::Contains("study window"), DataError);

  std::vector<Detection> before{
      det(0.0, 0.0, true, PhaseLabel::Solid, *cfg.window_start - 1)};
  CHECK_THROWS_AS(
      grid_accumulate(before, 1.0, GridMode::Phase, std::nullopt, cfg),
      DataError);

  // Without season_strict the window is advisory.
  cfg.season_strict = false;
  CHECK_NOTHROW(
      grid_accumulate(at_end, 1.0, GridMode::Phase, std::nullopt, cfg));
}

TEST_CASE("merging partial grids is exact and order independent") {
  RunConfig cfg = default_config();
  std::mt19937_64 rng(4321);
  std::vector<Detection> all;
  const PhaseLabel phases[3] = {PhaseLabel::Liquid, PhaseLabel::Mixed,
                                PhaseLabel::Solid};
  for (int i = 0; i < 400; ++i) {
    const double lat = -90.0 + 180.0 * uniform01(rng);
    const double lon = -180.0 + 360.0 * uniform01(rng);
    const bool precip = uniform01(rng) < 0.7;
    all.push_back(det(lat, lon, precip,
                      precip ? std::optional<PhaseLabel>(
                                   phases[uniform_below(rng, 3)])
                             : std::nullopt));
  }

  PhaseGrid whole =
      grid_accumulate(all, 2.5, GridMode::Phase, std::nullopt, cfg);

  // Eight contiguous splits, merged in two different orders.
  std::vector<PhaseGrid> parts;
  for (int p = 0; p < 8; ++p) {
    std::span<const Detection> slice(all.data() + p * 50, 50);
    parts.push_back(
        grid_accumulate(slice, 2.5, GridMode::Phase, std::nullopt, cfg));
  }
  PhaseGrid fwd(2.5, GridMode::Phase, std::nullopt);
  for (const auto& p : parts) fwd.merge(p);
  PhaseGrid rev(2.5, GridMode::Phase, std::nullopt);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) rev.merge(*it);

  CHECK(fwd == whole);
  CHECK(rev == whole);

  TempDir dir;
  write_grid_binary(dir.file("a.grid"), fwd);
  write_grid_binary(dir.file("b.grid"), rev);
  write_grid_binary(dir.file("c.grid"), whole);
  CHECK(file_checksum(dir.file("a.grid")) == file_checksum(dir.file("b.grid")));
  CHECK(file_checksum(dir.file("a.grid")) == file_checksum(dir.file("c.grid")));
}

TEST_CASE("merge refuses mismatched geometry or tags") {
  PhaseGrid a(1.0, GridMode::Phase, std::nullopt);
  PhaseGrid b(2.0, GridMode::Phase, std::nullopt);
  CHECK_THROWS_WITH_AS(a.merge(b), doctest::Contains("geometry or tag"),
                       DataError);
  PhaseGrid c(1.0, GridMode::Occurrence, std::nullopt);
  CHECK_THROWS_AS(a.merge(c), DataError);
  PhaseGrid d(1.0, GridMode::Phase, Season::Winter);
  CHECK_THROWS_AS(a.merge(d), DataError);
}

TEST_CASE("zonal means weight cells by observation count") {
  PhaseGrid g(1.0, GridMode::Phase, std::nullopt);
  // Two cells in the band centered at 45.0 (band 10.0 deg: [40, 50)).
  g.add(45.2, 10.0, 1.0);
  g.add(45.2, 10.0, 1.0);
  g.add(44.2, 20.0, 0.0);
  // One cell further south.
  g.add(-20.0, 0.0, 0.5);

  auto rows = zonal_mean(g, 10.0);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].band_center_lat == doctest::Approx(-15.0));
  CHECK(rows[0].count == 1);
  CHECK(rows[0].mean == doctest::Approx(0.5));
  CHECK(rows[1].band_center_lat == doctest::Approx(45.0));
  CHECK(rows[1].count == 3);
  CHECK(rows[1].mean == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(zonal_mean(g, 0.0), ConfigError);
}

TEST_CASE("grid difference subtracts means on the shared support") {
  PhaseGrid a(1.0, GridMode::Phase, Season::Winter);
  a.add(10.5, 10.5, 1.0);
  a.add(10.5, 10.5, 0.0);
  a.add(50.5, 50.5, 1.0);  // no counterpart in b
  PhaseGrid b(1.0, GridMode::Phase, Season::Summer);
  b.add(10.5, 10.5, 0.25);

  PhaseGrid d = grid_difference(a, b);
  CHECK(!d.season().has_value());
  REQUIRE(d.cells().size() == 1);
  const GridCell& cell = d.cells().begin()->second;
  CHECK(cell.count == 1);
  CHECK(cell.sum == doctest::Approx(0.25));  // 0.5 - 0.25

  PhaseGrid wrong(2.0, GridMode::Phase, std::nullopt);
  CHECK_THROWS_WITH_AS(grid_difference(a, wrong),
                       doctest::Contains("geometry"), DataError);
}

TEST_CASE("grid binary round trip preserves everything") {
  TempDir dir;
  PhaseGrid g(0.5, GridMode::Occurrence, Season::Summer);
  g.add(12.3, 45.6, 1.0);
  g.add(12.3, 45.6, 0.0);
  g.add(-70.0, -120.0, 1.0);

  write_grid_binary(dir.file("g.grid"), g);
  PhaseGrid back = load_grid_binary(dir.file("g.grid"));
  CHECK(back == g);
  CHECK(back.mode() == GridMode::Occurrence);
  CHECK(back.season() == Season::Summer);

  CHECK_THROWS_AS(load_grid_binary(dir.file("absent.grid")), DataError);
}

TEST_CASE("grid text outputs carry cell centers and counts") {
  TempDir dir;
  PhaseGrid g(1.0, GridMode::Phase, std::nullopt);
  g.add(45.5, -100.5, 1.0);
  g.add(45.5, -100.5, 0.0);

  write_grid_text(dir.file("g.txt"), g);
  std::string text = testutil::read_text(dir.file("g.txt"));
  CHECK(text.find("# lat, lon, mean, count") != std::string::npos);
  CHECK(text.find("45.5,-100.5,0.5,2") != std::string::npos);

  auto rows = zonal_mean(g, 10.0);
  write_zonal_text(dir.file("z.txt"), rows);
  std::string zonal = testutil::read_text(dir.file("z.txt"));
  CHECK(zonal.find("# band_center, mean, count") != std::string::npos);
  CHECK(zonal.find("45,0.5,2") != std::string::npos);
}
