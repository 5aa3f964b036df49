#include "calib/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "core/error.hpp"
#include "core/text.hpp"
#include "knn/engine.hpp"

namespace nestknn {

namespace {

std::string curve_name(int stage, LandSurfaceClass land, int k) {
  return "stage " + std::to_string(stage) + " land=" +
         std::string(to_string(land)) + " k=" + std::to_string(k);
}

}  // namespace

RocCurve roc_from_scores(std::span<const StageScore> scores, int k, int stage,
                         LandSurfaceClass land) {
  if (k < 1) throw ConfigError("roc: k must be >= 1");
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;

  // Bucket b holds the count of scores whose largest passing j is b-1, so a
  // suffix sum gives the number of scores passing threshold j/k.
  std::vector<std::uint64_t> pos_bucket(static_cast<size_t>(k) + 2, 0);
  std::vector<std::uint64_t> neg_bucket(static_cast<size_t>(k) + 2, 0);

  for (const auto& s : scores) {
    if (s.k_eff < 1 || s.votes < 0 || s.votes > s.k_eff)
      throw InternalError("roc: inconsistent stage score");
    // Largest j with votes*k > j*k_eff, or -1 when votes == 0.
    const std::int64_t num = static_cast<std::int64_t>(s.votes) * k;
    const std::int64_t jmax = (num + s.k_eff - 1) / s.k_eff - 1;
    if (jmax > k)
      throw InternalError("roc: score passes thresholds beyond 1");
    const size_t bucket = static_cast<size_t>(jmax + 1);
    if (s.positive) {
      ++positives;
      ++pos_bucket[bucket];
    } else {
      ++negatives;
      ++neg_bucket[bucket];
    }
  }

  if (positives == 0 || negatives == 0)
    throw DataError("roc for " + curve_name(stage, land, k) +
                    ": calibration population lacks " +
                    (positives == 0 ? "positive" : "negative") + " cases");

  RocCurve curve;
  curve.stage = stage;
  curve.land = land;
  curve.k = k;
  curve.positives = positives;
  curve.negatives = negatives;
  curve.points.reserve(static_cast<size_t>(k) + 1);

  std::uint64_t pos_passing = 0;
  std::uint64_t neg_passing = 0;
  for (int j = k; j >= 0; --j) {
    // Scores with jmax >= j pass; buckets above j+1 were added in earlier
    // (larger-j) iterations.
    pos_passing += pos_bucket[static_cast<size_t>(j) + 1];
    neg_passing += neg_bucket[static_cast<size_t>(j) + 1];
    RocPoint p;
    p.j = j;
    p.threshold = static_cast<double>(j) / static_cast<double>(k);
    p.p_f = static_cast<double>(neg_passing) / static_cast<double>(negatives);
    p.p_h = static_cast<double>(pos_passing) / static_cast<double>(positives);
    curve.points.push_back(p);
  }
  return curve;
}

double auc(const RocCurve& curve) {
  if (curve.points.empty()) throw ConfigError("auc: empty curve");
  double area = 0.0;
  double px = 0.0;
  double py = 0.0;
  auto step = [&](double x, double y) {
    if (x < px - 1e-12)
      throw InternalError("auc: curve not sorted by false-alarm rate");
    area += (x - px) * (y + py) / 2.0;
    px = x;
    py = y;
  };
  for (const auto& p : curve.points) step(p.p_f, p.p_h);
  step(1.0, 1.0);
  return area;
}

VoteThreshold max_curvature_threshold(const RocCurve& curve) {
  if (curve.points.size() < 5)
    throw DataError("max_curvature for " +
                    curve_name(curve.stage, curve.land, curve.k) +
                    ": fewer than 5 points");

  // Collapse runs of identical operating points, keeping the strictest
  // threshold that reaches each point. Points arrive ordered by descending
  // threshold, so the first of a run has the largest j.
  struct Pt {
    double x, y;
    int j;
  };
  std::vector<Pt> pts;
  for (const auto& p : curve.points) {
    if (!pts.empty() && pts.back().x == p.p_f && pts.back().y == p.p_h)
      continue;
    pts.push_back({p.p_f, p.p_h, p.j});
  }

  const auto fail = [&]() -> DataError {
    return DataError("no curvature maximum on the roc curve for " +
                     curve_name(curve.stage, curve.land, curve.k));
  };
  if (pts.size() < 3) throw fail();

  // 3-point moving average, endpoints kept.
  std::vector<Pt> sm = pts;
  for (size_t i = 1; i + 1 < pts.size(); ++i) {
    sm[i].x = (pts[i - 1].x + pts[i].x + pts[i + 1].x) / 3.0;
    sm[i].y = (pts[i - 1].y + pts[i].y + pts[i + 1].y) / 3.0;
  }

  std::vector<double> kappa(sm.size(), 0.0);
  double kmax = 0.0;
  for (size_t i = 1; i + 1 < sm.size(); ++i) {
    const double abx = sm[i].x - sm[i - 1].x;
    const double aby = sm[i].y - sm[i - 1].y;
    const double bcx = sm[i + 1].x - sm[i].x;
    const double bcy = sm[i + 1].y - sm[i].y;
    const double acx = sm[i + 1].x - sm[i - 1].x;
    const double acy = sm[i + 1].y - sm[i - 1].y;
    const double cross = std::abs(abx * bcy - aby * bcx);
    const double len =
        std::sqrt((abx * abx + aby * aby) * (bcx * bcx + bcy * bcy) *
                  (acx * acx + acy * acy));
    kappa[i] = len > 0.0 ? 2.0 * cross / len : 0.0;
    kmax = std::max(kmax, kappa[i]);
  }
  if (kmax <= 1e-9) throw fail();

  // Ties within 1e-9 relative resolve to the strictest threshold.
  int best_j = -1;
  for (size_t i = 1; i + 1 < sm.size(); ++i) {
    if (kappa[i] >= kmax - 1e-9 * kmax) best_j = std::max(best_j, sm[i].j);
  }
  if (best_j <= 0 || best_j >= curve.k)
    throw InternalError("curvature maximum landed on a curve endpoint");
  return VoteThreshold(best_j, curve.k);
}

std::size_t select_k(std::span<const RocCurve> curves) {
  if (curves.empty()) throw ConfigError("select_k: no candidate curves");
  std::size_t best = 0;
  double best_auc = auc(curves[0]);
  for (std::size_t i = 1; i < curves.size(); ++i) {
    const double a = auc(curves[i]);
    if (a > best_auc + 1e-12) {
      best = i;
      best_auc = a;
    } else if (std::abs(a - best_auc) <= 1e-12 &&
               curves[i].k < curves[best].k) {
      best = i;
    }
  }
  return best;
}

namespace {

struct TruthQuery {
  const MatchedSample* s = nullptr;
  bool precip = false;
  std::optional<PhaseLabel> ref;
};

// Splits usable calibration rows by land class. Rows already in the database
// are excluded (disjointness by id), as are rows without a rate or, when
// precipitating, without a derivable reference phase.
std::array<std::vector<TruthQuery>, kNumLandClasses> prepare_queries(
    const std::vector<MatchedSample>& calib, const AprioriDatabase& db,
    const RunConfig& config, CalibrationStats* stats) {
  std::array<std::vector<TruthQuery>, kNumLandClasses> by_land;
  for (const auto& q : calib) {
    if (stats) ++stats->seen;
    validate_sample(q, db.channel_count);
    if (db.contains_id(q.sample_id)) {
      if (stats) ++stats->excluded_in_database;
      continue;
    }
    if (!q.rate.has_value()) {
      if (stats) ++stats->excluded_no_truth;
      continue;
    }
    TruthQuery tq;
    tq.s = &q;
    tq.precip = q.precipitating();
    if (tq.precip) {
      if (q.ref_phase.has_value()) {
        tq.ref = q.ref_phase;
      } else if (q.active_phase.has_value() && q.passive_prob.has_value()) {
        tq.ref = merge_ref_phase(*q.active_phase, *q.passive_prob,
                                 config.ref_threshold);
      } else {
        if (stats) ++stats->excluded_no_truth;
        continue;
      }
    }
    if (stats) ++stats->used;
    by_land[static_cast<size_t>(land_index(land_of(q)))].push_back(tq);
  }
  return by_land;
}

// Stage-1 scores for every k in ks (ascending, each <= store size): one
// query at the largest k per row, counts read off running prefixes.
std::vector<std::vector<StageScore>> score_stage1(
    const std::vector<TruthQuery>& queries, const SearchIndex& index,
    const std::vector<int>& ks) {
  std::vector<std::vector<StageScore>> scores(ks.size());
  for (auto& v : scores) v.reserve(queries.size());
  const int kmax = ks.back();
  for (const auto& q : queries) {
    const auto hits = index.query(q.s->tb, kmax);
    int np = 0;
    size_t ci = 0;
    for (int i = 0; i < kmax && ci < ks.size(); ++i) {
      if (hits[static_cast<size_t>(i)].atmo != AtmosphericClass::Clear) ++np;
      if (i + 1 == ks[ci]) {
        scores[ci].push_back({np, ks[ci], q.precip});
        ++ci;
      }
    }
  }
  return scores;
}

// Stage-2 scores over rows the (k1, p1) occurrence stage routes onward with
// precipitating truth: liquid votes among the nearest k of the re-ranked
// precipitating neighbors, k clamped to their count. Positives have Liquid
// truth.
std::vector<std::vector<StageScore>> score_stage2(
    const std::vector<TruthQuery>& queries, const SearchIndex& index, int k1,
    const VoteThreshold& p1, const WeightMatrix& w2,
    const std::vector<int>& ks) {
  std::vector<std::vector<StageScore>> scores(ks.size());
  for (const auto& q : queries) {
    const auto hits = index.query(q.s->tb, k1);
    std::vector<NeighborHit> precip;
    precip.reserve(hits.size());
    for (const auto& h : hits) {
      if (h.atmo != AtmosphericClass::Clear) precip.push_back(h);
    }
    if (!stage1_decision(static_cast<int>(precip.size()), k1, p1)) continue;
    if (!q.precip) continue;  // phase stages train on precipitating truth

    const auto ranked2 = rank_subset(precip, q.s->tb, w2);
    const int n = static_cast<int>(ranked2.size());
    std::vector<int> liquid_prefix(static_cast<size_t>(n) + 1, 0);
    for (int i = 0; i < n; ++i) {
      liquid_prefix[static_cast<size_t>(i) + 1] =
          liquid_prefix[static_cast<size_t>(i)] +
          (ranked2[static_cast<size_t>(i)].atmo == AtmosphericClass::Liquid
               ? 1
               : 0);
    }
    for (size_t ci = 0; ci < ks.size(); ++ci) {
      const int k_eff = std::min(ks[ci], n);
      scores[ci].push_back({liquid_prefix[static_cast<size_t>(k_eff)], k_eff,
                            *q.ref == PhaseLabel::Liquid});
    }
  }
  return scores;
}

// Stage-3 scores over rows the calibrated stage 2 passes through: solid
// votes among the nearest k of the re-ranked non-liquid stage-2 pool, k
// clamped to the pool size. Positives have Solid truth.
std::vector<std::vector<StageScore>> score_stage3(
    const std::vector<TruthQuery>& queries, const SearchIndex& index, int k1,
    const VoteThreshold& p1, const WeightMatrix& w2, int k2,
    const VoteThreshold& p2, const WeightMatrix& w3,
    const std::vector<int>& ks) {
  std::vector<std::vector<StageScore>> scores(ks.size());
  for (const auto& q : queries) {
    const auto hits = index.query(q.s->tb, k1);
    std::vector<NeighborHit> precip;
    precip.reserve(hits.size());
    for (const auto& h : hits) {
      if (h.atmo != AtmosphericClass::Clear) precip.push_back(h);
    }
    if (!stage1_decision(static_cast<int>(precip.size()), k1, p1)) continue;
    if (!q.precip) continue;

    auto ranked2 = rank_subset(precip, q.s->tb, w2);
    if (static_cast<int>(ranked2.size()) < k2)
      throw InternalError("stage-3 scoring: stage-2 pool shallower than k2");
    ranked2.resize(static_cast<size_t>(k2));
    int nl = 0, ns = 0, nm = 0;
    for (const auto& h : ranked2) {
      if (h.atmo == AtmosphericClass::Liquid) ++nl;
      else if (h.atmo == AtmosphericClass::Solid) ++ns;
      else ++nm;
    }
    if (stage2_decision(nl, ns, nm, k2, p2) == StageTwoOutcome::Liquid)
      continue;

    std::vector<NeighborHit> pool;
    pool.reserve(ranked2.size());
    for (const auto& h : ranked2) {
      if (h.atmo != AtmosphericClass::Liquid) pool.push_back(h);
    }
    const auto ranked3 = rank_subset(pool, q.s->tb, w3);
    const int m = static_cast<int>(ranked3.size());

    std::vector<int> solid_prefix(static_cast<size_t>(m) + 1, 0);
    for (int i = 0; i < m; ++i) {
      solid_prefix[static_cast<size_t>(i) + 1] =
          solid_prefix[static_cast<size_t>(i)] +
          (ranked3[static_cast<size_t>(i)].atmo == AtmosphericClass::Solid
               ? 1
               : 0);
    }
    for (size_t ci = 0; ci < ks.size(); ++ci) {
      const int k_eff = std::min(ks[ci], m);
      scores[ci].push_back({solid_prefix[static_cast<size_t>(k_eff)], k_eff,
                            *q.ref == PhaseLabel::Solid});
    }
  }
  return scores;
}

void calibrate_land(LandSurfaceClass land,
                    const std::vector<TruthQuery>& queries,
                    const AprioriDatabase& db, const RunConfig& config,
                    CalibrationResult& res) {
  const std::string land_name(to_string(land));
  const auto store = db.land_store(land);
  if (store.empty())
    throw DataError("database has no samples for land class " + land_name);
  if (queries.empty())
    throw DataError("no usable calibration queries for land class " +
                    land_name);
  const int li = land_index(land);

  // Stage 1: occurrence. Candidates beyond the store size cannot be queried.
  const WeightMatrix& w1 = config.stage_weights(1, li);
  std::vector<int> k1_cands;
  for (int k : config.candidate_k) {
    if (static_cast<size_t>(k) <= store.size()) k1_cands.push_back(k);
  }
  if (k1_cands.empty())
    throw ConfigError("every candidate k exceeds the " + land_name +
                      " store size " + std::to_string(store.size()));

  SearchIndex index(store, w1);

  const auto s1_scores = score_stage1(queries, index, k1_cands);
  std::vector<RocCurve> s1_curves;
  s1_curves.reserve(k1_cands.size());
  for (size_t i = 0; i < k1_cands.size(); ++i)
    s1_curves.push_back(roc_from_scores(s1_scores[i], k1_cands[i], 1, land));
  const size_t pick1 = select_k(s1_curves);
  const int k1 = k1_cands[pick1];
  const VoteThreshold p1 = max_curvature_threshold(s1_curves[pick1]);
  res.selected_auc[static_cast<size_t>(li)][0] = auc(s1_curves[pick1]);
  for (auto& c : s1_curves) res.curves.push_back(std::move(c));

  // Stage 2: liquid vote. Curves cover every candidate; the AUC pick then
  // shrinks to the largest candidate with k2 < p1*k1, which keeps the
  // stage-2 pool at least k2 deep for every routed query.
  const WeightMatrix& w2 = config.stage_weights(2, li);
  const auto s2_scores =
      score_stage2(queries, index, k1, p1, w2, config.candidate_k);
  std::vector<RocCurve> s2_curves;
  s2_curves.reserve(config.candidate_k.size());
  for (size_t i = 0; i < config.candidate_k.size(); ++i)
    s2_curves.push_back(
        roc_from_scores(s2_scores[i], config.candidate_k[i], 2, land));
  size_t pick2 = select_k(s2_curves);
  const auto admissible2 = [&](int k) {
    return rational_strictly_less(k, 1, p1.num() * k1, p1.den());
  };
  if (!admissible2(config.candidate_k[pick2])) {
    std::optional<size_t> fallback;
    for (size_t i = 0; i < config.candidate_k.size(); ++i) {
      if (admissible2(config.candidate_k[i])) fallback = i;  // list ascends
    }
    if (!fallback.has_value())
      throw ConfigError(
          "no admissible k2 candidate for land " + land_name +
          ": the constraint k2 < p1*k1 = " + std::to_string(p1.num() * k1) +
          "/" + std::to_string(p1.den()) + " rejects every candidate");
    res.notes.push_back(
        "land=" + land_name + " stage=2: k shrunk from " +
        std::to_string(config.candidate_k[pick2]) + " to " +
        std::to_string(config.candidate_k[*fallback]) +
        " to satisfy k2 < p1*k1");
    pick2 = *fallback;
  }
  const int k2 = config.candidate_k[pick2];
  const VoteThreshold p2 = max_curvature_threshold(s2_curves[pick2]);
  res.selected_auc[static_cast<size_t>(li)][1] = auc(s2_curves[pick2]);
  for (auto& c : s2_curves) res.curves.push_back(std::move(c));

  // Stage 3: solid-versus-mixed over the stage-2 survivors. Same shrink
  // rule against k3 <= k2; k2 is itself a candidate, so a fallback exists.
  const WeightMatrix& w3 = config.stage_weights(3, li);
  const auto s3_scores =
      score_stage3(queries, index, k1, p1, w2, k2, p2, w3, config.candidate_k);
  std::vector<RocCurve> s3_curves;
  s3_curves.reserve(config.candidate_k.size());
  for (size_t i = 0; i < config.candidate_k.size(); ++i)
    s3_curves.push_back(
        roc_from_scores(s3_scores[i], config.candidate_k[i], 3, land));
  size_t pick3 = select_k(s3_curves);
  if (config.candidate_k[pick3] > k2) {
    std::optional<size_t> fallback;
    for (size_t i = 0; i < config.candidate_k.size(); ++i) {
      if (config.candidate_k[i] <= k2) fallback = i;
    }
    if (!fallback.has_value())
      throw InternalError("k3 fallback set is empty despite k2 candidacy");
    res.notes.push_back("land=" + land_name + " stage=3: k shrunk from " +
                        std::to_string(config.candidate_k[pick3]) + " to " +
                        std::to_string(config.candidate_k[*fallback]) +
                        " to satisfy k3 <= k2");
    pick3 = *fallback;
  }
  const int k3 = config.candidate_k[pick3];
  const VoteThreshold p3 = max_curvature_threshold(s3_curves[pick3]);
  res.selected_auc[static_cast<size_t>(li)][2] = auc(s3_curves[pick3]);
  for (auto& c : s3_curves) res.curves.push_back(std::move(c));

  res.params.get(land, 1) = StageParams{k1, w1, p1};
  res.params.get(land, 2) = StageParams{k2, w2, p2};
  res.params.get(land, 3) = StageParams{k3, w3, p3};
}

}  // namespace

CalibrationResult calibrate_all(const std::vector<MatchedSample>& calib,
                                const AprioriDatabase& db,
                                const RunConfig& config) {
  CalibrationResult res;
  const auto by_land = prepare_queries(calib, db, config, &res.stats);
  calibrate_land(LandSurfaceClass::SnowCovered, by_land[0], db, config, res);
  calibrate_land(LandSurfaceClass::NoSnow, by_land[1], db, config, res);
  res.params.validate(db.channel_count);
  return res;
}

RocCurve roc_curve(const std::vector<MatchedSample>& calibration_set,
                   const AprioriDatabase& db, const RunConfig& config, int k,
                   int stage, LandSurfaceClass land,
                   const StageParamsSet* prior) {
  if (stage < 1 || stage > kNumStages)
    throw ConfigError("roc_curve: stage must be 1.." +
                      std::to_string(kNumStages));
  if (k < 1) throw ConfigError("roc_curve: k must be >= 1");

  const std::string land_name(to_string(land));
  const auto store = db.land_store(land);
  if (store.empty())
    throw DataError("database has no samples for land class " + land_name);
  const auto by_land = prepare_queries(calibration_set, db, config, nullptr);
  const auto& queries = by_land[static_cast<size_t>(land_index(land))];
  if (queries.empty())
    throw DataError("no usable calibration queries for land class " +
                    land_name);

  const int li = land_index(land);
  SearchIndex index(store, config.stage_weights(1, li));
  const std::vector<int> ks{k};

  if (stage == 1) {
    if (static_cast<size_t>(k) > store.size())
      throw ConfigError("roc_curve: k exceeds the " + land_name +
                        " store size " + std::to_string(store.size()));
    return roc_from_scores(score_stage1(queries, index, ks)[0], k, 1, land);
  }

  if (prior == nullptr)
    throw ConfigError("roc_curve: stage " + std::to_string(stage) +
                      " needs calibrated earlier-stage parameters");
  const StageParams& s1 = prior->get(land, 1);
  if (static_cast<size_t>(s1.k) > store.size())
    throw ConfigError("roc_curve: prior k1 exceeds the " + land_name +
                      " store size " + std::to_string(store.size()));
  if (stage == 2) {
    return roc_from_scores(
        score_stage2(queries, index, s1.k, s1.p, config.stage_weights(2, li),
                     ks)[0],
        k, 2, land);
  }
  const StageParams& s2 = prior->get(land, 2);
  if (!rational_strictly_less(s2.k, 1, s1.p.num() * s1.k, s1.p.den()))
    throw ConfigError("roc_curve: prior violates k2 < p1*k1");
  return roc_from_scores(
      score_stage3(queries, index, s1.k, s1.p, config.stage_weights(2, li),
                   s2.k, s2.p, config.stage_weights(3, li), ks)[0],
      k, 3, land);
}

std::string CalibrationResult::summary(int channel_count) const {
  std::string out = "calibrated parameters (channels=" +
                    std::to_string(channel_count) + ")\n";
  for (auto land : {LandSurfaceClass::SnowCovered, LandSurfaceClass::NoSnow}) {
    const int li = land_index(land);
    for (int stage = 1; stage <= kNumStages; ++stage) {
      const auto& p = params.get(land, stage);
      out += "land=" + std::string(to_string(land)) + " stage=" +
             std::to_string(stage) + " k=" + std::to_string(p.k) + " p=" +
             p.p.str() + " auc=" +
             format_double(
                 selected_auc[static_cast<size_t>(li)][stage - 1]) +
             "\n";
    }
  }
  out += "queries seen=" + std::to_string(stats.seen) +
         " used=" + std::to_string(stats.used) +
         " excluded_in_database=" + std::to_string(stats.excluded_in_database) +
         " excluded_no_truth=" + std::to_string(stats.excluded_no_truth) + "\n";
  for (const auto& n : notes) out += "note: " + n + "\n";
  return out;
}

void write_roc_report(const std::string& path,
                      std::span<const RocCurve> curves) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create '" + path + "'");
  out << "# stage, land, k, threshold, p_F, p_H\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      out << c.stage << ',' << to_string(c.land) << ',' << c.k << ',' << p.j
          << '/' << c.k << ',' << format_double(p.p_f) << ','
          << format_double(p.p_h) << '\n';
    }
  }
  if (!out) throw DataError("write failure on '" + path + "'");
}

void write_params_file(const std::string& path, const StageParamsSet& params,
                       int channel_count) {
  params.validate(channel_count);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create '" + path + "'");
  out << "# calibrated stage parameters\n";
  out << "format=1\n";
  out << "channel_count=" << channel_count << '\n';
  for (auto land : {LandSurfaceClass::SnowCovered, LandSurfaceClass::NoSnow}) {
    for (int stage = 1; stage <= kNumStages; ++stage) {
      const auto& p = params.get(land, stage);
      const std::string prefix =
          std::string(to_string(land)) + ".stage" + std::to_string(stage);
      out << prefix << ".k=" << p.k << '\n';
      out << prefix << ".p=" << p.p.str() << '\n';
      out << prefix << ".weights=" << weight_spec_string(p.weights) << '\n';
    }
  }
  if (!out) throw DataError("write failure on '" + path + "'");
}

ParamsFile load_params_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  const std::string base_dir =
      std::filesystem::path(path).parent_path().string();

  struct Entry {
    std::string value;
    bool used = false;
  };
  std::map<std::string, Entry> kv;
  int lineno = 0;
  for (auto raw : split(text, '\n')) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto [k, v] = split_key_value(line, path + ":" + std::to_string(lineno));
    if (!kv.emplace(std::string(k), Entry{std::string(v), false}).second)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": duplicate key '" + std::string(k) + "'");
  }

  auto take = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw ConfigError(path + ": missing key '" + key + "'");
    it->second.used = true;
    return it->second.value;
  };

  if (take("format") != "1")
    throw ConfigError(path + ": unsupported params format");

  ParamsFile pf;
  try {
    pf.channel_count =
        static_cast<int>(parse_int(take("channel_count"), "channel_count"));
  } catch (const DataError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (pf.channel_count < 1 || pf.channel_count > 4096)
    throw ConfigError(path + ": channel_count out of range");

  for (auto land : {LandSurfaceClass::SnowCovered, LandSurfaceClass::NoSnow}) {
    for (int stage = 1; stage <= kNumStages; ++stage) {
      const std::string prefix =
          std::string(to_string(land)) + ".stage" + std::to_string(stage);
      StageParams sp;
      try {
        sp.k = static_cast<int>(parse_int(take(prefix + ".k"), prefix + ".k"));
      } catch (const DataError& e) {
        throw ConfigError(path + ": " + e.what());
      }
      sp.p = VoteThreshold::parse(take(prefix + ".p"));
      sp.weights = parse_weight_spec(take(prefix + ".weights"),
                                     pf.channel_count, base_dir);
      pf.params.get(land, stage) = std::move(sp);
    }
  }

  for (const auto& [key, entry] : kv) {
    if (!entry.used)
      throw ConfigError(path + ": unknown key '" + key + "'");
  }

  pf.params.validate(pf.channel_count);
  return pf;
}

}  // namespace nestknn
