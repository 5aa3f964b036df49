#include "nestknn/nestknn.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "calib/calibration.hpp"
#include "core/config.hpp"
#include "core/error.hpp"
#include "core/types.hpp"
#include "db/builder.hpp"
#include "detect/detector.hpp"
#include "grid/grid.hpp"
#include "io/columnar.hpp"
#include "io/envelope.hpp"
#include "metrics/report.hpp"
#include "synth/generator.hpp"

struct nestknn_config {
  nestknn::RunConfig cfg;
};

struct nestknn_database {
  nestknn::AprioriDatabase db;
};

struct nestknn_params {
  nestknn::ParamsFile file;
};

namespace {

thread_local std::string g_last_error = "no error";

// malloc so the C side frees with nestknn_string_free regardless of which
// runtime allocated the library.
char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_summary(char** summary, const std::string& text) {
  if (summary != nullptr) *summary = copy_string(text);
}

int arg_error(const std::string& what) {
  g_last_error = what;
  return NESTKNN_CONFIG_ERROR;
}

template <typename F>
int guard(F&& fn) {
  try {
    fn();
    return NESTKNN_OK;
  } catch (const nestknn::Error& e) {
    g_last_error = e.what();
    return static_cast<int>(e.status());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NESTKNN_INTERNAL_ERROR;
  } catch (...) {
    g_last_error = "unknown failure";
    return NESTKNN_INTERNAL_ERROR;
  }
}

// Database and parameter files are loadable on their own, so the channel
// layout is only checkable where they meet the run configuration.
void check_channels(int expected, int got, const char* what) {
  if (expected != got)
    throw nestknn::ConfigError(std::string(what) + ": channel count " +
                               std::to_string(got) +
                               " does not match configuration " +
                               std::to_string(expected));
}

}  // namespace

extern "C" {

const char* nestknn_last_error(void) { return g_last_error.c_str(); }

const char* nestknn_version(void) { return "1.0.0"; }

void nestknn_string_free(char* s) { std::free(s); }

int nestknn_config_default(nestknn_config** out) {
  if (out == nullptr) return arg_error("config_default: null output");
  *out = nullptr;
  return guard([&] {
    auto* handle = new nestknn_config{nestknn::default_config()};
    *out = handle;
  });
}

int nestknn_config_load(const char* path, nestknn_config** out) {
  if (path == nullptr || out == nullptr)
    return arg_error("config_load: null argument");
  *out = nullptr;
  return guard([&] {
    auto* handle = new nestknn_config{nestknn::load_config(path)};
    *out = handle;
  });
}

void nestknn_config_free(nestknn_config* cfg) { delete cfg; }

int nestknn_build_db(const nestknn_config* cfg, const char* samples_path,
                     const char* db_path, char** summary) {
  if (cfg == nullptr || samples_path == nullptr || db_path == nullptr)
    return arg_error("build_db: null argument");
  return guard([&] {
    const nestknn::RunConfig& c = cfg->cfg;
    nestknn::SampleFile file = nestknn::read_samples(samples_path);
    check_channels(c.channel_count, file.channel_count, "build_db samples");
    nestknn::DatabaseBuilder builder(c.channel_count, file.channel_order,
                                     c.database_size, c.seed,
                                     c.ref_threshold);
    for (const nestknn::MatchedSample& s : file.samples) builder.add(s);
    nestknn::AprioriDatabase db = builder.finish();
    nestknn::persist_database(db, db_path);
    set_summary(summary, builder.stats().summary() + db.summary());
  });
}

int nestknn_database_open(const char* db_path, nestknn_database** out) {
  if (db_path == nullptr || out == nullptr)
    return arg_error("database_open: null argument");
  *out = nullptr;
  return guard([&] {
    auto* handle = new nestknn_database{nestknn::load_database(db_path)};
    *out = handle;
  });
}

void nestknn_database_free(nestknn_database* db) { delete db; }

int nestknn_calibrate(const nestknn_config* cfg, const nestknn_database* db,
                      const char* samples_path, const char* params_path,
                      const char* roc_report_path, const char* roc_dir,
                      char** summary) {
  if (cfg == nullptr || db == nullptr || samples_path == nullptr ||
      params_path == nullptr || roc_report_path == nullptr)
    return arg_error("calibrate: null argument");
  return guard([&] {
    const nestknn::RunConfig& c = cfg->cfg;
    check_channels(c.channel_count, db->db.channel_count,
                   "calibrate database");
    nestknn::SampleFile file = nestknn::read_samples(samples_path);
    check_channels(c.channel_count, file.channel_count, "calibrate samples");
    nestknn::CalibrationResult result =
        nestknn::calibrate_all(file.samples, db->db, c);
    nestknn::write_params_file(params_path, result.params, c.channel_count);
    nestknn::write_roc_report(roc_report_path, result.curves);
    if (roc_dir != nullptr) {
      std::filesystem::create_directories(roc_dir);
      for (const nestknn::RocCurve& curve : result.curves) {
        std::ostringstream name;
        name << "roc_stage" << curve.stage << "_" << to_string(curve.land)
             << "_k" << curve.k << ".txt";
        nestknn::write_roc_report(
            (std::filesystem::path(roc_dir) / name.str()).string(),
            std::span<const nestknn::RocCurve>(&curve, 1));
      }
    }
    set_summary(summary, result.summary(c.channel_count));
  });
}

int nestknn_params_load(const char* path, nestknn_params** out) {
  if (path == nullptr || out == nullptr)
    return arg_error("params_load: null argument");
  *out = nullptr;
  return guard([&] {
    auto* handle = new nestknn_params{nestknn::load_params_file(path)};
    *out = handle;
  });
}

void nestknn_params_free(nestknn_params* params) { delete params; }

int nestknn_retrieve(const nestknn_config* cfg, const nestknn_database* db,
                     const nestknn_params* params, const char* query_path,
                     const char* detections_path, int workers,
                     char** summary) {
  if (cfg == nullptr || db == nullptr || params == nullptr ||
      query_path == nullptr || detections_path == nullptr)
    return arg_error("retrieve: null argument");
  return guard([&] {
    const nestknn::RunConfig& c = cfg->cfg;
    check_channels(c.channel_count, db->db.channel_count,
                   "retrieve database");
    check_channels(c.channel_count, params->file.channel_count,
                   "retrieve parameters");
    nestknn::SampleFile file = nestknn::read_samples(query_path);
    check_channels(c.channel_count, file.channel_count, "retrieve queries");
    nestknn::Retriever retriever(db->db, params->file.params);
    int threads = workers > 0 ? workers : c.threads;
    std::vector<nestknn::Detection> detections =
        retriever.retrieve_batch(file.samples, threads);
    nestknn::write_detections(detections_path, detections);

    std::uint64_t precip = 0;
    std::uint64_t phase[3] = {0, 0, 0};
    for (const nestknn::Detection& d : detections) {
      if (!d.precipitating) continue;
      ++precip;
      if (d.phase) ++phase[static_cast<int>(*d.phase)];
    }
    std::ostringstream out;
    out << "queries=" << detections.size() << " precipitating=" << precip
        << " liquid=" << phase[0] << " mixed=" << phase[1]
        << " solid=" << phase[2] << "\n";
    set_summary(summary, out.str());
  });
}

int nestknn_evaluate(const nestknn_config* cfg, const char* detections_path,
                     const char* truth_path, const char* report_path,
                     char** summary) {
  if (cfg == nullptr || detections_path == nullptr || truth_path == nullptr ||
      report_path == nullptr)
    return arg_error("evaluate: null argument");
  return guard([&] {
    const nestknn::RunConfig& c = cfg->cfg;
    std::vector<nestknn::Detection> detections =
        nestknn::read_detections(detections_path);
    nestknn::SampleFile truth = nestknn::read_samples(truth_path);
    check_channels(c.channel_count, truth.channel_count, "evaluate truth");
    nestknn::EvaluationReport report =
        nestknn::evaluate_detections(detections, truth, c);
    nestknn::write_evaluation_report(report_path, report);
    std::ostringstream out;
    out << "truth_rows=" << report.truth_rows << " matched=" << report.matched
        << " unmatched_detections=" << report.unmatched_detections
        << " rows=" << report.rows.size() << "\n";
    set_summary(summary, out.str());
  });
}

int nestknn_grid(const nestknn_config* cfg, const char* detections_path,
                 int mode_occurrence, const char* season,
                 const char* grid_text_path, const char* grid_binary_path,
                 const char* zonal_path, char** summary) {
  if (cfg == nullptr || detections_path == nullptr)
    return arg_error("grid: null argument");
  return guard([&] {
    const nestknn::RunConfig& c = cfg->cfg;
    std::vector<nestknn::Detection> detections =
        nestknn::read_detections(detections_path);
    nestknn::GridMode mode = mode_occurrence != 0
                                 ? nestknn::GridMode::Occurrence
                                 : nestknn::GridMode::Phase;
    std::optional<nestknn::Season> season_filter;
    if (season != nullptr) season_filter = nestknn::parse_season(season);
    nestknn::PhaseGrid grid = nestknn::grid_accumulate(
        detections, c.grid_cell_deg, mode, season_filter, c);
    if (grid_text_path != nullptr) nestknn::write_grid_text(grid_text_path, grid);
    if (grid_binary_path != nullptr)
      nestknn::write_grid_binary(grid_binary_path, grid);
    if (zonal_path != nullptr) {
      std::vector<nestknn::ZonalRow> rows =
          nestknn::zonal_mean(grid, c.zonal_band_deg);
      nestknn::write_zonal_text(zonal_path, rows);
    }
    std::uint64_t observations = 0;
    for (const auto& [key, cell] : grid.cells()) observations += cell.count;
    std::ostringstream out;
    out << "detections=" << detections.size() << " cells=" << grid.cells().size()
        << " observations=" << observations << "\n";
    set_summary(summary, out.str());
  });
}

int nestknn_grid_merge(const char* const* inputs, size_t n_inputs,
                       const char* out_binary_path, const char* out_text_path) {
  if (inputs == nullptr || n_inputs == 0)
    return arg_error("grid_merge: no inputs");
  return guard([&] {
    for (size_t i = 0; i < n_inputs; ++i)
      if (inputs[i] == nullptr)
        throw nestknn::ConfigError("grid_merge: null input path");
    nestknn::PhaseGrid merged = nestknn::load_grid_binary(inputs[0]);
    for (size_t i = 1; i < n_inputs; ++i)
      merged.merge(nestknn::load_grid_binary(inputs[i]));
    if (out_binary_path != nullptr)
      nestknn::write_grid_binary(out_binary_path, merged);
    if (out_text_path != nullptr)
      nestknn::write_grid_text(out_text_path, merged);
  });
}

int nestknn_synth(const char* manifest_path, const char* build_path,
                  const char* holdout_path, int binary_format,
                  char** summary) {
  if (manifest_path == nullptr || build_path == nullptr ||
      holdout_path == nullptr)
    return arg_error("synth: null argument");
  return guard([&] {
    nestknn::SynthManifest manifest = nestknn::parse_manifest(manifest_path);
    nestknn::ScenarioOutput output = nestknn::scenario_separable(
        manifest.separation_sigma, manifest.n_per_class, manifest.seed,
        manifest.channel_count, manifest.ref_threshold);
    nestknn::SampleFile build_file{
        manifest.channel_count,
        nestknn::default_channel_names(manifest.channel_count),
        std::move(output.build)};
    nestknn::SampleFile holdout_file{
        manifest.channel_count,
        nestknn::default_channel_names(manifest.channel_count),
        std::move(output.holdout)};
    if (binary_format != 0) {
      nestknn::write_samples_binary(build_path, build_file);
      nestknn::write_samples_binary(holdout_path, holdout_file);
    } else {
      nestknn::write_samples_text(build_path, build_file);
      nestknn::write_samples_text(holdout_path, holdout_file);
    }
    std::ostringstream out;
    out << "build=" << build_file.samples.size()
        << " holdout=" << holdout_file.samples.size()
        << " channels=" << manifest.channel_count << "\n";
    set_summary(summary, out.str());
  });
}

int nestknn_file_checksum(const char* path, uint64_t* out) {
  if (path == nullptr || out == nullptr)
    return arg_error("file_checksum: null argument");
  *out = 0;
  return guard([&] { *out = nestknn::file_checksum(path); });
}

}  // extern "C"
