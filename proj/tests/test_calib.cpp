#include <cmath>
#include <string>
#include <vector>

#include "calib/calibration.hpp"
#include "core/error.hpp"
#include "db/builder.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "io/envelope.hpp"
#include "synth/generator.hpp"

using namespace nestknn;
using testutil::TempDir;

namespace {

StageScore sc(int votes, int k_eff, bool positive) {
  return StageScore{votes, k_eff, positive};
}

RocCurve curve_of(std::vector<RocPoint> pts, int k) {
  RocCurve c;
  c.stage = 1;
  c.land = LandSurfaceClass::NoSnow;
  c.k = k;
  c.positives = 1;
  c.negatives = 1;
  c.points = std::move(pts);
  return c;
}

RocPoint pt(int j, double k, double p_f, double p_h) {
  return RocPoint{j, j / k, p_f, p_h};
}

}  // namespace

TEST_CASE("roc sweep counts strict vote passes") {
  std::vector<StageScore> scores{sc(4, 4, true), sc(3, 4, true),
                                 sc(1, 4, false), sc(0, 4, false)};
  RocCurve c = roc_from_scores(scores, 4, 1, LandSurfaceClass::NoSnow);
  REQUIRE(c.points.size() == 5);
  CHECK(c.positives == 2);
  CHECK(c.negatives == 2);

  // j descends, so the curve starts at (0,0) under threshold 1.
  CHECK(c.points[0].j == 4);
  CHECK(c.points[0].p_f == 0.0);
  CHECK(c.points[0].p_h == 0.0);
  // j=3: only the 4-vote positive passes (4 > 3).
  CHECK(c.points[1].p_h == 0.5);
  CHECK(c.points[1].p_f == 0.0);
  // j=2: both positives.
  CHECK(c.points[2].p_h == 1.0);
  CHECK(c.points[2].p_f == 0.0);
  // j=0: the 1-vote negative passes, the 0-vote one never does.
  CHECK(c.points[4].j == 0);
  CHECK(c.points[4].p_f == 0.5);
  CHECK(c.points[4].p_h == 1.0);

  CHECK(auc(c) == doctest::Approx(1.0));
}

TEST_CASE("roc clamps vote fractions through k_eff") {
  // votes=3 of k_eff=3 counts as a full vote fraction even when k=6.
  std::vector<StageScore> scores{sc(3, 3, true), sc(0, 6, false)};
  RocCurve c = roc_from_scores(scores, 6, 3, LandSurfaceClass::NoSnow);
  // 3*6 > j*3 for j <= 5: the clamped score passes every threshold below 1.
  CHECK(c.points[1].j == 5);
  CHECK(c.points[1].p_h == 1.0);
  CHECK(c.points[1].p_f == 0.0);
}

TEST_CASE("roc rejects one-class populations") {
  std::vector<StageScore> only_pos{sc(1, 4, true)};
  CHECK_THROWS_WITH_AS(
      roc_from_scores(only_pos, 4, 1, LandSurfaceClass::NoSnow),
      doctest::Contains("negative"), DataError);
  std::vector<StageScore> only_neg{sc(1, 4, false)};
  CHECK_THROWS_AS(roc_from_scores(only_neg, 4, 1, LandSurfaceClass::NoSnow),
                  DataError);
}

TEST_CASE("roc curves are monotone under the threshold sweep") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    int k = 1 + static_cast<int>(uniform_below(rng, 30));
    std::vector<StageScore> scores;
    for (int i = 0; i < 200; ++i) {
      int k_eff = 1 + static_cast<int>(uniform_below(
                          rng, static_cast<std::uint64_t>(k)));
      int votes = static_cast<int>(
          uniform_below(rng, static_cast<std::uint64_t>(k_eff) + 1));
      scores.push_back(sc(votes, k_eff, i % 2 == 0));
    }
    RocCurve c = roc_from_scores(scores, k, 1, LandSurfaceClass::SnowCovered);
    for (size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].p_f >= c.points[i - 1].p_f);
      CHECK(c.points[i].p_h >= c.points[i - 1].p_h);
      CHECK(c.points[i].threshold < c.points[i - 1].threshold);
    }
    double a = auc(c);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0 + 1e-12);
  }
}

TEST_CASE("auc of the single-operating-point example is 0.80") {
  // One interior point (p_F, p_H) = (0.2, 0.8): 8/10 positives and 2/10
  // negatives carry a vote.
  std::vector<StageScore> scores;
  for (int i = 0; i < 10; ++i) scores.push_back(sc(i < 8 ? 1 : 0, 1, true));
  for (int i = 0; i < 10; ++i) scores.push_back(sc(i < 2 ? 1 : 0, 1, false));
  RocCurve c = roc_from_scores(scores, 1, 1, LandSurfaceClass::NoSnow);
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[1].p_f == doctest::Approx(0.2));
  CHECK(c.points[1].p_h == doctest::Approx(0.8));
  CHECK(auc(c) == doctest::Approx(0.80));
}

TEST_CASE("max curvature lands on the corner of an L curve") {
  RocCurve c = curve_of(
      {pt(4, 4, 0.0, 0.0), pt(3, 4, 0.0, 0.5), pt(2, 4, 0.0, 1.0),
       pt(1, 4, 0.5, 1.0), pt(0, 4, 1.0, 1.0)},
      4);
  CHECK(max_curvature_threshold(c) == VoteThreshold(1, 2));  // j=2, k=4
}

TEST_CASE("max curvature dedupes repeated operating points to the largest j") {
  // The corner (0,1) appears at j=4 and j=3; the collapsed point must keep
  // j=4, so the answer is 4/6, not 3/6.
  RocCurve c = curve_of(
      {pt(6, 6, 0.0, 0.0), pt(5, 6, 0.0, 0.5), pt(4, 6, 0.0, 1.0),
       pt(3, 6, 0.0, 1.0), pt(2, 6, 0.5, 1.0), pt(0, 6, 1.0, 1.0)},
      6);
  CHECK(max_curvature_threshold(c) == VoteThreshold(2, 3));  // j=4 of k=6
}

TEST_CASE("max curvature needs five points and visible bending") {
  RocCurve flat = curve_of(
      {pt(4, 4, 0.0, 0.0), pt(3, 4, 0.25, 0.25), pt(2, 4, 0.5, 0.5),
       pt(1, 4, 0.75, 0.75), pt(0, 4, 1.0, 1.0)},
      4);
  CHECK_THROWS_WITH_AS(max_curvature_threshold(flat),
                       doctest::Contains("curvature"), DataError);

  RocCurve tiny = curve_of(
      {pt(3, 3, 0.0, 0.0), pt(2, 3, 0.0, 1.0), pt(0, 3, 1.0, 1.0)}, 3);
  CHECK_THROWS_WITH_AS(max_curvature_threshold(tiny),
                       doctest::Contains("fewer than 5"), DataError);
}

TEST_CASE("k selection maximizes auc with ties to the smallest k") {
  RocCurve good = curve_of(
      {pt(2, 2, 0.0, 0.0), pt(1, 2, 0.0, 1.0), pt(0, 2, 1.0, 1.0)}, 2);
  RocCurve bad = curve_of(
      {pt(2, 2, 0.0, 0.0), pt(1, 2, 0.5, 0.5), pt(0, 2, 1.0, 1.0)}, 2);
  RocCurve good_smaller_k = good;
  good_smaller_k.k = 1;

  std::vector<RocCurve> curves{bad, good, good_smaller_k};
  CHECK(select_k(curves) == 2);  // tie between the two goods -> smaller k
  std::vector<RocCurve> curves2{good, bad};
  CHECK(select_k(curves2) == 0);
  CHECK_THROWS_AS(select_k(std::vector<RocCurve>{}), ConfigError);
}

namespace {

struct CalibWorld {
  RunConfig config;
  AprioriDatabase db;
  std::vector<MatchedSample> calib;
};

// Overlapping classes (2.5 sigma) so vote fractions spread over many
// operating points; easy data collapses every curve onto its corners.
CalibWorld make_calib_world(std::vector<int> candidates = {4, 8, 16, 32}) {
  CalibWorld w;
  w.config = default_config();
  w.config.channel_count = 5;
  w.config.channel_order = default_channel_names(5);
  w.config.database_size = 40;
  w.config.candidate_k = std::move(candidates);
  for (auto& per_stage : w.config.weights)
    for (auto& wm : per_stage) wm = WeightMatrix::identity(5);

  ScenarioOutput scenario = scenario_separable(2.5, 300, 4242, 5, 0.5);
  DatabaseBuilder builder(5, w.config.channel_order, 40, 7, 0.5);
  for (const auto& s : scenario.build) builder.add(s);
  w.db = builder.finish();
  w.calib = std::move(scenario.build);
  return w;
}

}  // namespace

TEST_CASE("calibration produces a valid parameter table") {
  CalibWorld w = make_calib_world();
  CalibrationResult res = calibrate_all(w.calib, w.db, w.config);

  CHECK_NOTHROW(res.params.validate(5));
  CHECK(res.stats.seen == w.calib.size());
  // Every database member came from this stream and is excluded.
  CHECK(res.stats.excluded_in_database == w.db.total_size());
  CHECK(res.stats.used ==
        res.stats.seen - res.stats.excluded_in_database);

  for (int land = 0; land < 2; ++land) {
    auto lc = static_cast<LandSurfaceClass>(land);
    for (int stage = 1; stage <= 3; ++stage) {
      const StageParams& p = res.params.get(lc, stage);
      bool known = false;
      for (int k : w.config.candidate_k) known |= (k == p.k);
      CHECK(known);
      double a = res.selected_auc[land][stage - 1];
      CHECK(a > 0.5);  // better than chance on separable-ish data
      CHECK(a <= 1.0 + 1e-12);
    }
  }

  // Curves cover stage 1 (store-clamped candidates) and stages 2-3 (all).
  CHECK(res.curves.size() >= 3 * w.config.candidate_k.size());
  for (const auto& c : res.curves)
    for (size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].p_f >= c.points[i - 1].p_f);
      CHECK(c.points[i].p_h >= c.points[i - 1].p_h);
    }

  for (const auto& n : res.notes) CHECK(n.find("shrunk") != std::string::npos);
  CHECK(res.summary(5).find("stage") != std::string::npos);
}

TEST_CASE("calibration is deterministic") {
  CalibWorld w = make_calib_world();
  CalibrationResult a = calibrate_all(w.calib, w.db, w.config);
  CalibrationResult b = calibrate_all(w.calib, w.db, w.config);
  for (int land = 0; land < 2; ++land) {
    auto lc = static_cast<LandSurfaceClass>(land);
    for (int stage = 1; stage <= 3; ++stage) {
      CHECK(a.params.get(lc, stage).k == b.params.get(lc, stage).k);
      CHECK(a.params.get(lc, stage).p == b.params.get(lc, stage).p);
    }
  }
  REQUIRE(a.curves.size() == b.curves.size());
  for (size_t i = 0; i < a.curves.size(); ++i) {
    REQUIRE(a.curves[i].points.size() == b.curves[i].points.size());
    for (size_t j = 0; j < a.curves[i].points.size(); ++j) {
      CHECK(a.curves[i].points[j].p_f == b.curves[i].points[j].p_f);
      CHECK(a.curves[i].points[j].p_h == b.curves[i].points[j].p_h);
    }
  }
}

TEST_CASE("selected stage parameters respect the nesting constraints") {
  CalibWorld w = make_calib_world();
  CalibrationResult res = calibrate_all(w.calib, w.db, w.config);
  for (int land = 0; land < 2; ++land) {
    auto lc = static_cast<LandSurfaceClass>(land);
    const auto& s1 = res.params.get(lc, 1);
    const auto& s2 = res.params.get(lc, 2);
    const auto& s3 = res.params.get(lc, 3);
    CHECK(rational_strictly_less(s2.k, 1, s1.p.num() * s1.k, s1.p.den()));
    CHECK(s3.k <= s2.k);
  }
}

TEST_CASE("an inadmissible candidate grid is a config error") {
  // A single candidate k cannot satisfy k2 < p1*k1 since p1 < 1.
  CalibWorld w = make_calib_world({16});
  CHECK_THROWS_WITH_AS(calibrate_all(w.calib, w.db, w.config),
                       doctest::Contains("no admissible k2"), ConfigError);
}

TEST_CASE("public roc_curve reproduces the calibration curves") {
  CalibWorld w = make_calib_world();
  CalibrationResult res = calibrate_all(w.calib, w.db, w.config);

  auto find_curve = [&](int stage, LandSurfaceClass land,
                        int k) -> const RocCurve& {
    for (const auto& c : res.curves)
      if (c.stage == stage && c.land == land && c.k == k) return c;
    FAIL("curve not found");
    return res.curves.front();
  };

  for (int land = 0; land < 2; ++land) {
    auto lc = static_cast<LandSurfaceClass>(land);
    for (int stage = 1; stage <= 3; ++stage) {
      int k = res.params.get(lc, stage).k;
      RocCurve direct =
          roc_curve(w.calib, w.db, w.config, k, stage, lc, &res.params);
      const RocCurve& stored = find_curve(stage, lc, k);
      REQUIRE(direct.points.size() == stored.points.size());
      CHECK(direct.positives == stored.positives);
      CHECK(direct.negatives == stored.negatives);
      for (size_t i = 0; i < direct.points.size(); ++i) {
        CHECK(direct.points[i].p_f == stored.points[i].p_f);
        CHECK(direct.points[i].p_h == stored.points[i].p_h);
      }
    }
  }

  // Stages 2 and 3 cannot run without calibrated upstream parameters.
  CHECK_THROWS_WITH_AS(
      roc_curve(w.calib, w.db, w.config, 8, 2, LandSurfaceClass::NoSnow),
      doctest::Contains("earlier-stage"), ConfigError);
}

TEST_CASE("roc report and params file round trip") {
  TempDir dir;
  CalibWorld w = make_calib_world();
  CalibrationResult res = calibrate_all(w.calib, w.db, w.config);

  write_params_file(dir.file("p.txt"), res.params, 5);
  ParamsFile loaded = load_params_file(dir.file("p.txt"));
  CHECK(loaded.channel_count == 5);
  for (int land = 0; land < 2; ++land) {
    auto lc = static_cast<LandSurfaceClass>(land);
    for (int stage = 1; stage <= 3; ++stage) {
      CHECK(loaded.params.get(lc, stage).k == res.params.get(lc, stage).k);
      CHECK(loaded.params.get(lc, stage).p == res.params.get(lc, stage).p);
      CHECK(loaded.params.get(lc, stage).weights ==
            res.params.get(lc, stage).weights);
    }
  }

  write_roc_report(dir.file("roc.txt"), res.curves);
  std::string report = testutil::read_text(dir.file("roc.txt"));
  CHECK(report.find("stage") != std::string::npos);
  // One row per point plus headers.
  size_t total_points = 0;
  for (const auto& c : res.curves) total_points += c.points.size();
  size_t lines = 0;
  for (char ch : report)
    if (ch == '\n') ++lines;
  CHECK(lines >= total_points);

  write_params_file(dir.file("p2.txt"), res.params, 5);
  CHECK(file_checksum(dir.file("p.txt")) == file_checksum(dir.file("p2.txt")));
}
