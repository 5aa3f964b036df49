#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/types.hpp"
#include "detect/detector.hpp"
#include "io/columnar.hpp"

namespace nestknn {

// Detection classes scored in the evaluation report: occurrence is the
// precipitation yes/no decision, the other three are one-vs-rest phase
// decisions among all matched rows.
inline constexpr int kNumDetectionClasses = 4;
std::string_view detection_class_name(int dclass);  // 1..4

struct MetricRow {
  std::string group;  // "surface=all", "surface=ground", "dry_band=..."
  int dclass = 1;
  ContingencyTable table;
  std::optional<double> pod;
  std::optional<double> pofa;
  std::optional<double> hss;
};

struct EvaluationReport {
  std::uint64_t truth_rows = 0;
  std::uint64_t matched = 0;
  std::uint64_t unmatched_detections = 0;
  std::uint64_t truth_without_rate = 0;
  std::uint64_t truth_without_ref = 0;  // precipitating truth, no phase label

  std::vector<MetricRow> rows;

  // Rank correlation of stage-1 vote counts against the precipitation rate
  // over precipitating truth; rank-based, so vote counts work as well as
  // vote fractions.
  std::optional<double> spearman_votes_rate;
  // RMS difference of detected vs reference phase indices where both sides
  // are precipitating.
  std::optional<double> rmse_phase_index;
  // Divergence of the detected phase-index histogram from the reference
  // one, raw and max-normalized.
  std::optional<double> kl_phase_raw;
  std::optional<double> kl_phase_normalized;
  // Clear-vs-precipitating brightness separation of the truth set, per
  // analysis surface (ground, wet snow, dry snow).
  std::array<std::optional<double>, 3> separation_by_surface{};

  const MetricRow* find(const std::string& group, int dclass) const;
  std::string text() const;
};

// Joins detections to truth rows by sample id and scores the detection
// classes per surface stratum, plus dry-snow rows banded by their 5-degree
// cell's dry-snow fraction over the truth set.
EvaluationReport evaluate_detections(std::span<const Detection> detections,
                                     const SampleFile& truth,
                                     const RunConfig& config);

void write_evaluation_report(const std::string& path,
                             const EvaluationReport& report);

}  // namespace nestknn
