#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/rational.hpp"
#include "core/types.hpp"
#include "db/builder.hpp"
#include "detect/detector.hpp"

namespace nestknn {

// One calibration observation for a stage: the vote count, the neighbor
// count actually inspected (differs from the nominal k only in stage 3,
// where the pool can clamp it), and the truth flag for that stage's target.
struct StageScore {
  int votes = 0;
  int k_eff = 0;
  bool positive = false;
};

// ROC point at vote-fraction threshold j/k. The decision at this threshold
// is "votes * k > j * k_eff", evaluated in integers.
struct RocPoint {
  int j = 0;
  double threshold = 0.0;  // j / k
  double p_f = 0.0;        // false-alarm rate
  double p_h = 0.0;        // hit rate
};

struct RocCurve {
  int stage = 0;
  LandSurfaceClass land = LandSurfaceClass::NoSnow;
  int k = 0;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  // Ordered by descending threshold, so p_f ascends and the curve starts at
  // (0,0) for threshold 1.
  std::vector<RocPoint> points;
};

// Sweeps thresholds j/k for j = k down to 0 over the score set. Throws
// DataError when either class is empty.
RocCurve roc_from_scores(std::span<const StageScore> scores, int k, int stage,
                         LandSurfaceClass land);

// Trapezoid area under the polyline with (0,0) and (1,1) anchors appended.
double auc(const RocCurve& curve);

// Operating threshold at the maximum-curvature point: duplicate operating
// points collapse to their largest threshold, coordinates get a 3-point
// moving average (endpoints kept), curvature is Menger's on each interior
// point. Curvature ties within 1e-9 relative resolve to the largest
// threshold. Curves with fewer than 5 points and flat curves (max curvature
// <= 1e-9) are DataErrors.
VoteThreshold max_curvature_threshold(const RocCurve& curve);

// Index of the curve with the largest AUC; ties within 1e-12 go to the
// smallest k.
std::size_t select_k(std::span<const RocCurve> curves);

struct CalibrationStats {
  std::uint64_t seen = 0;
  std::uint64_t used = 0;
  std::uint64_t excluded_in_database = 0;
  std::uint64_t excluded_no_truth = 0;
};

struct CalibrationResult {
  StageParamsSet params;
  std::vector<RocCurve> curves;  // every candidate curve, all stages and lands
  // auc[land][stage-1] for the selected k.
  std::array<std::array<double, kNumStages>, kNumLandClasses> selected_auc{};
  CalibrationStats stats;
  std::vector<std::string> notes;  // constraint adjustments, one line each

  std::string summary(int channel_count) const;
};

// Calibrates all three stages for both land classes against one database.
// Stage populations nest: stage 2 sees queries the calibrated stage 1 routes
// onward whose truth is precipitating; stage 3 sees queries the calibrated
// stage 2 passes through. Queries whose id is in the database are excluded.
// Stage 2 and 3 pick k by AUC over every candidate, then shrink to the
// largest candidate satisfying the depth constraints (k2 < p1*k1, k3 <= k2);
// an empty admissible set is a ConfigError.
CalibrationResult calibrate_all(const std::vector<MatchedSample>& calib,
                                const AprioriDatabase& db,
                                const RunConfig& config);

// One ROC curve for a single (stage, land, k) against a database. Stages 2
// and 3 require calibrated earlier-stage parameters in `prior`; weight
// matrices always come from `config`.
RocCurve roc_curve(const std::vector<MatchedSample>& calibration_set,
                   const AprioriDatabase& db, const RunConfig& config, int k,
                   int stage, LandSurfaceClass land,
                   const StageParamsSet* prior = nullptr);

// Report with one row per curve point: stage, land, k, threshold, p_F, p_H.
void write_roc_report(const std::string& path,
                      std::span<const RocCurve> curves);

// Calibrated parameter table as a key=value file.
void write_params_file(const std::string& path, const StageParamsSet& params,
                       int channel_count);

struct ParamsFile {
  int channel_count = 0;
  StageParamsSet params;
};

ParamsFile load_params_file(const std::string& path);

}  // namespace nestknn
