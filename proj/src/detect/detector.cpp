#include "detect/detector.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "core/error.hpp"
#include "core/text.hpp"
#include "core/time.hpp"
#include "io/columnar.hpp"

namespace nestknn {

const StageParams& StageParamsSet::get(LandSurfaceClass land,
                                       int stage) const {
  if (stage < 1 || stage > kNumStages)
    throw InternalError("stage index out of range");
  return params[static_cast<size_t>(land)][static_cast<size_t>(stage - 1)];
}

StageParams& StageParamsSet::get(LandSurfaceClass land, int stage) {
  if (stage < 1 || stage > kNumStages)
    throw InternalError("stage index out of range");
  return params[static_cast<size_t>(land)][static_cast<size_t>(stage - 1)];
}

void StageParamsSet::validate(int channel_count) const {
  for (auto land : {LandSurfaceClass::SnowCovered, LandSurfaceClass::NoSnow}) {
    const auto& s1 = get(land, 1);
    const auto& s2 = get(land, 2);
    const auto& s3 = get(land, 3);
    const std::string where = "params for land=" + std::string(to_string(land));
    for (int stage = 1; stage <= kNumStages; ++stage) {
      const auto& s = get(land, stage);
      if (s.k < 1)
        throw ConfigError(where + ": stage " + std::to_string(stage) +
                          " k must be >= 1");
      if (s.weights.dim() != channel_count)
        throw ConfigError(where + ": stage " + std::to_string(stage) +
                          " weights are " + std::to_string(s.weights.dim()) +
                          "-dimensional, channel_count is " +
                          std::to_string(channel_count));
    }
    // k2 < p1*k1 guarantees the stage-1 positives hand stage 2 at least k2
    // precipitating candidates (n_p > p1*k1 > k2 - 1).
    if (!rational_strictly_less(s2.k, 1, s1.p.num() * s1.k, s1.p.den()))
      throw ConfigError(where + ": k2 < p1*k1 violated (k2=" +
                        std::to_string(s2.k) + ", p1*k1=" +
                        std::to_string(s1.p.num() * s1.k) + "/" +
                        std::to_string(s1.p.den()) + ")");
    if (s3.k > s2.k)
      throw ConfigError(where + ": k3 must be <= k2");
  }
}

bool stage1_decision(int n_precip, int k1, const VoteThreshold& p1) {
  if (k1 < 1 || n_precip < 0 || n_precip > k1)
    throw InternalError("stage1_decision: inconsistent vote counts");
  return p1.passes(n_precip, k1);
}

StageTwoOutcome stage2_decision(int n_liquid, int n_solid, int n_mixed,
                                int k2, const VoteThreshold& p2) {
  if (k2 < 1 || n_liquid < 0 || n_solid < 0 || n_mixed < 0 ||
      n_liquid + n_solid + n_mixed != k2)
    throw InternalError("stage2_decision: inconsistent vote counts");
  const bool unique_max = n_liquid > n_solid && n_liquid > n_mixed;
  if (unique_max && p2.passes(n_liquid, k2)) return StageTwoOutcome::Liquid;
  return StageTwoOutcome::Continue;
}

PhaseLabel stage3_decision(int n_solid, int n_mixed, int k3_eff,
                           const VoteThreshold& p3) {
  if (k3_eff < 1 || n_solid < 0 || n_mixed < 0 || n_solid + n_mixed != k3_eff)
    throw InternalError("stage3_decision: inconsistent vote counts");
  return p3.passes(n_solid, k3_eff) ? PhaseLabel::Solid : PhaseLabel::Mixed;
}

PhaseResult detect_phase(std::span<const NeighborHit> precip_candidates,
                         std::span<const double> y, const StageParams& s2,
                         const StageParams& s3) {
  if (static_cast<int>(precip_candidates.size()) < s2.k)
    throw InternalError("detect_phase: fewer candidates than k2");
  for (const auto& c : precip_candidates) {
    if (c.atmo == AtmosphericClass::Clear)
      throw InternalError("detect_phase: clear-sky candidate");
  }

  auto ranked2 = rank_subset(precip_candidates, y, s2.weights);
  ranked2.resize(static_cast<size_t>(s2.k));

  PhaseResult r;
  for (const auto& h : ranked2) {
    switch (h.atmo) {
      case AtmosphericClass::Liquid: ++r.n_liquid; break;
      case AtmosphericClass::Solid: ++r.n_solid; break;
      case AtmosphericClass::Mixed: ++r.n_mixed; break;
      case AtmosphericClass::Clear: break;  // excluded above
    }
  }

  if (stage2_decision(r.n_liquid, r.n_solid, r.n_mixed, s2.k, s2.p) ==
      StageTwoOutcome::Liquid) {
    r.phase = PhaseLabel::Liquid;
    return r;
  }

  // Stage 3 candidates: the stage-2 selection minus its liquid members.
  std::vector<NeighborHit> pool;
  pool.reserve(ranked2.size());
  for (const auto& h : ranked2) {
    if (h.atmo != AtmosphericClass::Liquid) pool.push_back(h);
  }
  if (pool.empty())
    throw InternalError("detect_phase: stage-2 fallthrough with an all-liquid "
                        "neighborhood");

  auto ranked3 = rank_subset(pool, y, s3.weights);
  const int k3_eff = std::min<int>(s3.k, static_cast<int>(ranked3.size()));
  ranked3.resize(static_cast<size_t>(k3_eff));

  r.stage3_k_eff = k3_eff;
  for (const auto& h : ranked3) {
    if (h.atmo == AtmosphericClass::Solid) ++r.stage3_n_solid;
    else ++r.stage3_n_mixed;
  }
  r.phase = stage3_decision(r.stage3_n_solid, r.stage3_n_mixed, k3_eff, s3.p);
  return r;
}

Retriever::Retriever(const AprioriDatabase& db, const StageParamsSet& params)
    : db_(&db), params_(params) {
  params_.validate(db.channel_count);
  for (auto land : {LandSurfaceClass::SnowCovered, LandSurfaceClass::NoSnow}) {
    auto& store = stores_[static_cast<size_t>(land)];
    store = db.land_store(land);
    if (store.empty()) continue;  // queried land classes error at retrieve()
    const auto& s1 = params_.get(land, 1);
    if (static_cast<size_t>(s1.k) > store.size())
      throw ConfigError("k1=" + std::to_string(s1.k) +
                        " exceeds database size " +
                        std::to_string(store.size()) + " for land=" +
                        std::string(to_string(land)));
    index_[static_cast<size_t>(land)].emplace(store, s1.weights);
  }
}

const SearchIndex& Retriever::stage1_index(LandSurfaceClass land) const {
  const auto& idx = index_[static_cast<size_t>(land)];
  if (!idx)
    throw DataError("database has no samples for land class " +
                    std::string(to_string(land)));
  return *idx;
}

Detection Retriever::retrieve(const MatchedSample& query) const {
  validate_sample(query, db_->channel_count);
  const LandSurfaceClass land = land_of(query);

  Detection det;
  det.sample_id = query.sample_id;
  det.land = land;
  det.lat = query.lat;
  det.lon = query.lon;
  det.timestamp = query.timestamp;

  const SearchIndex& index = stage1_index(land);
  const auto& s1 = params_.get(land, 1);
  const auto hits = index.query(query.tb, s1.k);

  std::vector<NeighborHit> precip;
  precip.reserve(hits.size());
  for (const auto& h : hits) {
    if (h.atmo != AtmosphericClass::Clear) precip.push_back(h);
  }
  det.n_p = static_cast<int>(precip.size());
  det.precipitating = stage1_decision(det.n_p, s1.k, s1.p);
  if (!det.precipitating) return det;

  const PhaseResult pr = detect_phase(precip, query.tb, params_.get(land, 2),
                                      params_.get(land, 3));
  det.phase = pr.phase;
  det.n_l = pr.n_liquid;
  det.n_s = pr.n_solid;
  det.n_m = pr.n_mixed;
  return det;
}

std::vector<Detection> Retriever::retrieve_batch(
    std::span<const MatchedSample> queries, int threads) const {
  if (threads < 1) throw ConfigError("threads must be >= 1");
  std::vector<Detection> out(queries.size());
  if (threads == 1 || queries.size() < 2) {
    for (size_t i = 0; i < queries.size(); ++i) out[i] = retrieve(queries[i]);
    return out;
  }

  const size_t n = queries.size();
  const size_t workers = std::min<size_t>(static_cast<size_t>(threads), n);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        // Slot i of the output depends only on query i, so any partition
        // of the index range yields identical results.
        for (size_t i = w; i < n; i += workers) out[i] = retrieve(queries[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

void write_detections(const std::string& path,
                      std::span<const Detection> det) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create '" + path + "'");
  out << "# sample_id, precipitating, phase, n_p, n_l, n_s, n_m, lat, lon, "
         "timestamp\n";
  for (const auto& d : det) {
    out << d.sample_id << ',' << (d.precipitating ? '1' : '0') << ',';
    if (d.precipitating && d.phase) {
      out << to_string(*d.phase) << ',' << d.n_p << ',' << d.n_l << ','
          << d.n_s << ',' << d.n_m;
    } else {
      out << "-," << d.n_p << ",-,-,-";
    }
    out << ',' << format_double(d.lat) << ',' << format_double(d.lon) << ','
        << format_iso8601(d.timestamp) << '\n';
  }
  if (!out) throw DataError("write failure on '" + path + "'");
}

std::vector<Detection> read_detections(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<Detection> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto ctx = [&]() { return path + ":" + std::to_string(lineno); };
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto fields = split(sv, ',');
    if (fields.size() != 10)
      throw DataError(ctx() + ": expected 10 columns, got " +
                      std::to_string(fields.size()));
    try {
      Detection d;
      d.sample_id = parse_uint(fields[0], "sample_id");
      auto flag = trim(fields[1]);
      if (flag == "1") d.precipitating = true;
      else if (flag == "0") d.precipitating = false;
      else throw DataError("precipitating must be 0 or 1");
      auto phase_text = trim(fields[2]);
      if (phase_text != "-") d.phase = parse_phase(phase_text);
      if (d.precipitating != d.phase.has_value())
        throw DataError("phase column inconsistent with precipitating flag");
      d.n_p = static_cast<int>(parse_int(fields[3], "n_p"));
      auto vote = [&](std::string_view f, std::string_view what) {
        auto t = trim(f);
        if (t == "-") return 0;
        return static_cast<int>(parse_int(t, what));
      };
      d.n_l = vote(fields[4], "n_l");
      d.n_s = vote(fields[5], "n_s");
      d.n_m = vote(fields[6], "n_m");
      d.lat = parse_double(fields[7], "lat");
      d.lon = parse_double(fields[8], "lon");
      auto ts = trim(fields[9]);
      d.timestamp = (ts.find('T') != std::string_view::npos ||
                     ts.find('-') != std::string_view::npos)
                        ? parse_iso8601(ts)
                        : parse_int(ts, "timestamp");
      d.land = LandSurfaceClass::NoSnow;  // not carried by the file
      out.push_back(d);
    } catch (const DataError& e) {
      throw DataError(ctx() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace nestknn
