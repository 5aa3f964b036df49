#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/rational.hpp"
#include "core/types.hpp"
#include "core/weights.hpp"
#include "db/builder.hpp"
#include "knn/engine.hpp"

namespace nestknn {

// Neighbor count, weight matrix and vote threshold for one cascade stage.
struct StageParams {
  int k = 0;
  WeightMatrix weights;
  VoteThreshold p{1, 2};
};

// Full parameter table: three stages per land class.
struct StageParamsSet {
  std::array<std::array<StageParams, kNumStages>, kNumLandClasses> params;

  const StageParams& get(LandSurfaceClass land, int stage) const;
  StageParams& get(LandSurfaceClass land, int stage);

  // Enforces per-land consistency: weight dims match channel_count, k >= 1,
  // k2 < p1*k1 (exact rational, guarantees stage 2 has enough candidates)
  // and k3 <= k2.
  void validate(int channel_count) const;
};

// Stage decisions as pure vote arithmetic. Thresholds are strict: a vote
// count exactly at p*k does not pass.

// Precipitating iff n_precip > p1 * k1.
bool stage1_decision(int n_precip, int k1, const VoteThreshold& p1);

enum class StageTwoOutcome : std::uint8_t { Liquid, Continue };

// Liquid iff n_liquid is the unique maximum of the three counts and
// n_liquid > p2 * k2; anything else falls through to stage 3.
StageTwoOutcome stage2_decision(int n_liquid, int n_solid, int n_mixed,
                                int k2, const VoteThreshold& p2);

// Solid iff n_solid > p3 * k3_eff, else Mixed. k3_eff is the neighbor count
// actually used (already clamped to the candidate pool).
PhaseLabel stage3_decision(int n_solid, int n_mixed, int k3_eff,
                           const VoteThreshold& p3);

// Stage 2 + 3 composition over the precipitating members of the stage-1
// neighborhood. Candidates are re-ranked under each stage's own weights;
// stage 3 sees the stage-2 selection minus its liquid-labelled members.
struct PhaseResult {
  PhaseLabel phase = PhaseLabel::Mixed;
  int n_liquid = 0;  // stage-2 votes over k2
  int n_solid = 0;
  int n_mixed = 0;
  int stage3_k_eff = 0;      // 0 when stage 3 was not reached
  int stage3_n_solid = 0;
  int stage3_n_mixed = 0;
};

PhaseResult detect_phase(std::span<const NeighborHit> precip_candidates,
                         std::span<const double> y, const StageParams& s2,
                         const StageParams& s3);

// One cascade outcome. Vote counts are kept for reporting; lat/lon/time are
// copied from the query so detections alone suffice for gridding.
struct Detection {
  std::uint64_t sample_id = 0;
  LandSurfaceClass land = LandSurfaceClass::NoSnow;
  bool precipitating = false;
  std::optional<PhaseLabel> phase;
  int n_p = 0;
  int n_l = 0;
  int n_s = 0;
  int n_m = 0;
  double lat = 0.0;
  double lon = 0.0;
  std::int64_t timestamp = 0;
};

// Owns the per-land stage-1 indexes over one database and runs the cascade.
class Retriever {
public:
  Retriever(const AprioriDatabase& db, const StageParamsSet& params);

  Detection retrieve(const MatchedSample& query) const;

  // Output is a pure function of the inputs; the thread count only splits
  // the work, which the tests verify.
  std::vector<Detection> retrieve_batch(std::span<const MatchedSample> queries,
                                        int threads) const;

  const StageParamsSet& params() const { return params_; }
  const SearchIndex& stage1_index(LandSurfaceClass land) const;

private:
  const AprioriDatabase* db_;
  StageParamsSet params_;
  std::array<std::vector<const MatchedSample*>, kNumLandClasses> stores_;
  std::array<std::optional<SearchIndex>, kNumLandClasses> index_;
};

// Text carrier, one line per query:
//   sample_id, precipitating, phase, n_p, n_l, n_s, n_m, lat, lon, timestamp
// phase and the stage-2 counts are "-" for non-precipitating outcomes.
void write_detections(const std::string& path, std::span<const Detection> det);
std::vector<Detection> read_detections(const std::string& path);

}  // namespace nestknn
