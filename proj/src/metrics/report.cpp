#include "metrics/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <unordered_map>

#include "core/error.hpp"
#include "core/text.hpp"
#include "db/builder.hpp"
#include "grid/grid.hpp"
#include "metrics/metrics.hpp"

namespace nestknn {

std::string_view detection_class_name(int dclass) {
  switch (dclass) {
    case 1: return "occurrence";
    case 2: return "liquid";
    case 3: return "mixed";
    case 4: return "solid";
    default: throw ConfigError("detection class must be 1..4");
  }
}

namespace {

// Dry-snow share is a per-location climatology, so it aggregates over
// coarser cells than the output grids.
constexpr double kBandCellDeg = 5.0;

const char* const kBandNames[5] = {
    "dry_band=0.00-0.10", "dry_band=0.10-0.25", "dry_band=0.25-0.45",
    "dry_band=0.45-0.70", "dry_band=0.70-1.00"};

int band_of(double fraction) {
  if (fraction >= 0.70) return 4;
  if (fraction >= 0.45) return 3;
  if (fraction >= 0.25) return 2;
  if (fraction >= 0.10) return 1;
  return 0;
}

std::uint64_t band_cell_key(double lat, double lon) {
  // Same fold-in convention as the grids: exact upper edges join the last
  // cell. 36 rows by 72 columns at 5 degrees.
  auto row = static_cast<std::uint64_t>(std::floor((lat + 90.0) / kBandCellDeg));
  auto col =
      static_cast<std::uint64_t>(std::floor((lon + 180.0) / kBandCellDeg));
  row = std::min<std::uint64_t>(row, 35);
  col = std::min<std::uint64_t>(col, 71);
  return row * 72 + col;
}

struct JoinedRow {
  const Detection* det = nullptr;
  const MatchedSample* truth = nullptr;
  bool truth_precip = false;
  std::optional<PhaseLabel> ref;
  AnalysisSurfaceClass surface = AnalysisSurfaceClass::Ground;
  int band = -1;  // dry-snow rows only
};

std::string fmt_opt(const std::optional<double>& v) {
  return v.has_value() ? format_double(*v) : std::string("-");
}

}  // namespace

EvaluationReport evaluate_detections(std::span<const Detection> detections,
                                     const SampleFile& truth,
                                     const RunConfig& config) {
  EvaluationReport rep;
  rep.truth_rows = truth.samples.size();

  std::unordered_map<std::uint64_t, const MatchedSample*> by_id;
  by_id.reserve(truth.samples.size());
  for (const auto& s : truth.samples) {
    validate_sample(s, truth.channel_count);
    if (!by_id.emplace(s.sample_id, &s).second)
      throw DataError("duplicate truth sample id " +
                      std::to_string(s.sample_id));
  }

  std::vector<JoinedRow> joined;
  joined.reserve(detections.size());
  for (const auto& d : detections) {
    const auto it = by_id.find(d.sample_id);
    if (it == by_id.end()) {
      ++rep.unmatched_detections;
      continue;
    }
    const MatchedSample& s = *it->second;
    if (!s.rate.has_value()) {
      ++rep.truth_without_rate;
      continue;
    }
    JoinedRow row;
    row.det = &d;
    row.truth = &s;
    row.truth_precip = s.precipitating();
    if (row.truth_precip) {
      if (s.ref_phase.has_value()) {
        row.ref = s.ref_phase;
      } else if (s.active_phase.has_value() && s.passive_prob.has_value()) {
        row.ref = merge_ref_phase(*s.active_phase, *s.passive_prob,
                                  config.ref_threshold);
      } else {
        ++rep.truth_without_ref;  // occurrence is still scorable
      }
    }
    row.surface = analysis_surface(s);
    joined.push_back(row);
  }
  rep.matched = joined.size();
  if (joined.empty()) throw DataError("no detections matched the truth set");

  // Dry-snow share per coarse cell over the matched truth rows, then each
  // dry-snow row inherits its cell's share as a band.
  struct CellTally {
    std::uint64_t dry = 0;
    std::uint64_t total = 0;
  };
  std::map<std::uint64_t, CellTally> band_cells;
  for (const auto& r : joined) {
    auto& c = band_cells[band_cell_key(r.truth->lat, r.truth->lon)];
    ++c.total;
    if (r.surface == AnalysisSurfaceClass::DrySnow) ++c.dry;
  }
  for (auto& r : joined) {
    if (r.surface != AnalysisSurfaceClass::DrySnow) continue;
    const auto& c = band_cells[band_cell_key(r.truth->lat, r.truth->lon)];
    r.band = band_of(static_cast<double>(c.dry) / static_cast<double>(c.total));
  }

  struct Group {
    std::string name;
    std::function<bool(const JoinedRow&)> member;
  };
  std::vector<Group> groups;
  groups.push_back({"surface=all", [](const JoinedRow&) { return true; }});
  for (auto surf : {AnalysisSurfaceClass::Ground, AnalysisSurfaceClass::WetSnow,
                    AnalysisSurfaceClass::DrySnow}) {
    groups.push_back({"surface=" + std::string(to_string(surf)),
                      [surf](const JoinedRow& r) { return r.surface == surf; }});
  }
  for (int b = 0; b < 5; ++b) {
    groups.push_back(
        {kBandNames[b], [b](const JoinedRow& r) { return r.band == b; }});
  }

  const auto phase_for = [](int dclass) {
    return dclass == 2 ? PhaseLabel::Liquid
           : dclass == 3 ? PhaseLabel::Mixed
                         : PhaseLabel::Solid;
  };
  for (const auto& g : groups) {
    for (int dc = 1; dc <= kNumDetectionClasses; ++dc) {
      std::vector<bool> pred, obs;
      for (const auto& r : joined) {
        if (!g.member(r)) continue;
        if (dc == 1) {
          pred.push_back(r.det->precipitating);
          obs.push_back(r.truth_precip);
        } else {
          if (r.truth_precip && !r.ref.has_value()) continue;
          const PhaseLabel want = phase_for(dc);
          pred.push_back(r.det->precipitating && r.det->phase == want);
          obs.push_back(r.truth_precip && r.ref == want);
        }
      }
      if (pred.empty()) continue;
      MetricRow row;
      row.group = g.name;
      row.dclass = dc;
      row.table = contingency(pred, obs);
      try {
        row.pod = pod(row.table);
      } catch (const DataError&) {
      }
      try {
        row.pofa = pofa(row.table);
      } catch (const DataError&) {
      }
      try {
        row.hss = hss(row.table);
      } catch (const DataError&) {
      }
      rep.rows.push_back(std::move(row));
    }
  }

  // Vote count vs rate rank correlation over precipitating truth.
  {
    std::vector<double> votes, rates;
    for (const auto& r : joined) {
      if (!r.truth_precip) continue;
      votes.push_back(static_cast<double>(r.det->n_p));
      rates.push_back(*r.truth->rate);
    }
    try {
      rep.spearman_votes_rate = spearman(votes, rates);
    } catch (const DataError&) {
    }
  }

  // Phase-index RMS where both sides are precipitating and labeled.
  {
    std::vector<double> x, y;
    for (const auto& r : joined) {
      if (!r.det->precipitating || !r.det->phase.has_value()) continue;
      if (!r.truth_precip || !r.ref.has_value()) continue;
      x.push_back(phase_index(*r.det->phase));
      y.push_back(phase_index(*r.ref));
    }
    try {
      rep.rmse_phase_index = rmse_normalized(x, y);
    } catch (const DataError&) {
    }
  }

  // Detected vs reference phase-index histograms.
  {
    ProbabilityHistogram p, q;
    for (const auto& r : joined) {
      if (r.det->precipitating && r.det->phase.has_value())
        p.add(phase_index(*r.det->phase));
      if (r.truth_precip && r.ref.has_value()) q.add(phase_index(*r.ref));
    }
    try {
      rep.kl_phase_raw = kl_divergence(p, q);
      rep.kl_phase_normalized = kl_divergence_normalized(p, q);
    } catch (const DataError&) {
    }
  }

  // Clear-vs-precipitating brightness separation of the truth rows.
  for (int si = 0; si < 3; ++si) {
    const auto surf = static_cast<AnalysisSurfaceClass>(si);
    ChannelVector clear_sum, precip_sum;
    std::uint64_t n_clear = 0, n_precip = 0;
    for (const auto& r : joined) {
      if (r.surface != surf) continue;
      auto& sum = r.truth_precip ? precip_sum : clear_sum;
      auto& n = r.truth_precip ? n_precip : n_clear;
      if (sum.empty()) sum.assign(r.truth->tb.size(), 0.0);
      for (size_t i = 0; i < sum.size(); ++i) sum[i] += r.truth->tb[i];
      ++n;
    }
    if (n_clear == 0 || n_precip == 0) continue;
    for (auto& v : clear_sum) v /= static_cast<double>(n_clear);
    for (auto& v : precip_sum) v /= static_cast<double>(n_precip);
    rep.separation_by_surface[static_cast<size_t>(si)] =
        signal_separation(clear_sum, precip_sum).second;
  }

  return rep;
}

const MetricRow* EvaluationReport::find(const std::string& group,
                                        int dclass) const {
  for (const auto& r : rows) {
    if (r.group == group && r.dclass == dclass) return &r;
  }
  return nullptr;
}

std::string EvaluationReport::text() const {
  std::string out;
  out += "# evaluation report\n";
  out += "# truth_rows=" + std::to_string(truth_rows) +
         " matched=" + std::to_string(matched) +
         " unmatched_detections=" + std::to_string(unmatched_detections) +
         " truth_without_rate=" + std::to_string(truth_without_rate) +
         " truth_without_ref=" + std::to_string(truth_without_ref) + "\n";
  out += "# group, class, n, a, b, c, d, pod, pofa, hss\n";
  for (const auto& r : rows) {
    out += r.group + ',' + std::string(detection_class_name(r.dclass)) + ',' +
           std::to_string(r.table.total()) + ',' + std::to_string(r.table.a) +
           ',' + std::to_string(r.table.b) + ',' + std::to_string(r.table.c) +
           ',' + std::to_string(r.table.d) + ',' + fmt_opt(r.pod) + ',' +
           fmt_opt(r.pofa) + ',' + fmt_opt(r.hss) + '\n';
  }
  out += "# summary\n";
  out += "spearman_votes_rate=" + fmt_opt(spearman_votes_rate) + '\n';
  out += "rmse_phase_index=" + fmt_opt(rmse_phase_index) + '\n';
  out += "kl_phase_raw=" + fmt_opt(kl_phase_raw) + '\n';
  out += "kl_phase_max_normalized=" + fmt_opt(kl_phase_normalized) + '\n';
  const char* const surf_names[3] = {"ground", "wet_snow", "dry_snow"};
  for (int si = 0; si < 3; ++si) {
    out += "separation_" + std::string(surf_names[si]) + '=' +
           fmt_opt(separation_by_surface[static_cast<size_t>(si)]) + '\n';
  }
  return out;
}

void write_evaluation_report(const std::string& path,
                             const EvaluationReport& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create '" + path + "'");
  out << report.text();
  if (!out) throw DataError("write failure on '" + path + "'");
}

}  // namespace nestknn
