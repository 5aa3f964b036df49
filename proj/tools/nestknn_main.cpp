// Command-line front end. Everything goes through the C API; this file owns
// no retrieval logic, only argument plumbing and checksum logging.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nestknn/nestknn.h"

namespace {

struct ConfigHandle {
  nestknn_config* ptr = nullptr;
  ~ConfigHandle() { nestknn_config_free(ptr); }
};

struct DatabaseHandle {
  nestknn_database* ptr = nullptr;
  ~DatabaseHandle() { nestknn_database_free(ptr); }
};

struct ParamsHandle {
  nestknn_params* ptr = nullptr;
  ~ParamsHandle() { nestknn_params_free(ptr); }
};

int report_failure(int status) {
  std::fprintf(stderr, "error: %s\n", nestknn_last_error());
  return status;
}

void print_summary(char* summary) {
  if (summary == nullptr) return;
  std::fputs(summary, stdout);
  nestknn_string_free(summary);
}

// Checksums of produced artifacts go to stdout so runs are comparable from
// logs alone.
int log_checksum(const std::string& path) {
  if (path.empty()) return 0;
  std::uint64_t sum = 0;
  int rc = nestknn_file_checksum(path.c_str(), &sum);
  if (rc != NESTKNN_OK) return rc;
  std::printf("checksum %s %016" PRIx64 "\n", path.c_str(), sum);
  return NESTKNN_OK;
}

int open_config(const std::string& path, ConfigHandle& cfg) {
  if (path.empty()) return nestknn_config_default(&cfg.ptr);
  return nestknn_config_load(path.c_str(), &cfg.ptr);
}

struct BuildArgs {
  std::string config, samples, out;
};

int run_build(const BuildArgs& a) {
  ConfigHandle cfg;
  if (int rc = open_config(a.config, cfg); rc != NESTKNN_OK)
    return report_failure(rc);
  char* summary = nullptr;
  if (int rc = nestknn_build_db(cfg.ptr, a.samples.c_str(), a.out.c_str(),
                                &summary);
      rc != NESTKNN_OK)
    return report_failure(rc);
  print_summary(summary);
  if (int rc = log_checksum(a.out); rc != NESTKNN_OK)
    return report_failure(rc);
  return 0;
}

struct CalibrateArgs {
  std::string config, db, samples, params, roc_report, roc_dir;
};

int run_calibrate(const CalibrateArgs& a) {
  ConfigHandle cfg;
  if (int rc = open_config(a.config, cfg); rc != NESTKNN_OK)
    return report_failure(rc);
  DatabaseHandle db;
  if (int rc = nestknn_database_open(a.db.c_str(), &db.ptr);
      rc != NESTKNN_OK)
    return report_failure(rc);
  char* summary = nullptr;
  if (int rc = nestknn_calibrate(
          cfg.ptr, db.ptr, a.samples.c_str(), a.params.c_str(),
          a.roc_report.c_str(), a.roc_dir.empty() ? nullptr : a.roc_dir.c_str(),
          &summary);
      rc != NESTKNN_OK)
    return report_failure(rc);
  print_summary(summary);
  for (const std::string& path : {a.params, a.roc_report})
    if (int rc = log_checksum(path); rc != NESTKNN_OK)
      return report_failure(rc);
  return 0;
}

struct RetrieveArgs {
  std::string config, db, params, queries, out;
  int workers = 0;
};

int run_retrieve(const RetrieveArgs& a) {
  ConfigHandle cfg;
  if (int rc = open_config(a.config, cfg); rc != NESTKNN_OK)
    return report_failure(rc);
  DatabaseHandle db;
  if (int rc = nestknn_database_open(a.db.c_str(), &db.ptr);
      rc != NESTKNN_OK)
    return report_failure(rc);
  ParamsHandle params;
  if (int rc = nestknn_params_load(a.params.c_str(), &params.ptr);
      rc != NESTKNN_OK)
    return report_failure(rc);
  char* summary = nullptr;
  if (int rc = nestknn_retrieve(cfg.ptr, db.ptr, params.ptr,
                                a.queries.c_str(), a.out.c_str(), a.workers,
                                &summary);
      rc != NESTKNN_OK)
    return report_failure(rc);
  print_summary(summary);
  if (int rc = log_checksum(a.out); rc != NESTKNN_OK)
    return report_failure(rc);
  return 0;
}

struct EvaluateArgs {
  std::string config, detections, truth, report;
};

int run_evaluate(const EvaluateArgs& a) {
  ConfigHandle cfg;
  if (int rc = open_config(a.config, cfg); rc != NESTKNN_OK)
    return report_failure(rc);
  char* summary = nullptr;
  if (int rc = nestknn_evaluate(cfg.ptr, a.detections.c_str(),
                                a.truth.c_str(), a.report.c_str(), &summary);
      rc != NESTKNN_OK)
    return report_failure(rc);
  print_summary(summary);
  if (int rc = log_checksum(a.report); rc != NESTKNN_OK)
    return report_failure(rc);
  return 0;
}

struct GridArgs {
  std::string config, detections, season, out_text, out_binary, zonal;
  std::vector<std::string> merge;
  bool occurrence = false;
};

int run_grid(const GridArgs& a) {
  if (a.merge.empty() && a.detections.empty()) {
    std::fprintf(stderr, "error: grid needs --detections or --merge\n");
    return NESTKNN_CONFIG_ERROR;
  }
  if (!a.merge.empty()) {
    std::vector<const char*> inputs;
    inputs.reserve(a.merge.size());
    for (const std::string& path : a.merge) inputs.push_back(path.c_str());
    if (int rc = nestknn_grid_merge(
            inputs.data(), inputs.size(),
            a.out_binary.empty() ? nullptr : a.out_binary.c_str(),
            a.out_text.empty() ? nullptr : a.out_text.c_str());
        rc != NESTKNN_OK)
      return report_failure(rc);
  } else {
    ConfigHandle cfg;
    if (int rc = open_config(a.config, cfg); rc != NESTKNN_OK)
      return report_failure(rc);
    char* summary = nullptr;
    if (int rc = nestknn_grid(
            cfg.ptr, a.detections.c_str(), a.occurrence ? 1 : 0,
            a.season.empty() ? nullptr : a.season.c_str(),
            a.out_text.empty() ? nullptr : a.out_text.c_str(),
            a.out_binary.empty() ? nullptr : a.out_binary.c_str(),
            a.zonal.empty() ? nullptr : a.zonal.c_str(), &summary);
        rc != NESTKNN_OK)
      return report_failure(rc);
    print_summary(summary);
  }
  for (const std::string& path : {a.out_text, a.out_binary, a.zonal})
    if (int rc = log_checksum(path); rc != NESTKNN_OK)
      return report_failure(rc);
  return 0;
}

struct SynthArgs {
  std::string manifest, build, holdout;
  bool binary = false;
};

int run_synth(const SynthArgs& a) {
  char* summary = nullptr;
  if (int rc = nestknn_synth(a.manifest.c_str(), a.build.c_str(),
                             a.holdout.c_str(), a.binary ? 1 : 0, &summary);
      rc != NESTKNN_OK)
    return report_failure(rc);
  print_summary(summary);
  for (const std::string& path : {a.build, a.holdout})
    if (int rc = log_checksum(path); rc != NESTKNN_OK)
      return report_failure(rc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nested KNN precipitation detection and phase retrieval"};
  app.set_version_flag("--version", std::string(nestknn_version()));
  app.require_subcommand(1);

  BuildArgs build_args;
  CLI::App* build = app.add_subcommand(
      "build-db", "build the balanced a-priori database from matched samples");
  build->add_option("--config", build_args.config, "run configuration file");
  build->add_option("--samples", build_args.samples, "matched sample file")
      ->required();
  build->add_option("--out", build_args.out, "database output path")
      ->required();

  CalibrateArgs cal_args;
  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "calibrate stage thresholds and neighbor counts");
  calibrate->add_option("--config", cal_args.config, "run configuration file");
  calibrate->add_option("--db", cal_args.db, "database path")->required();
  calibrate->add_option("--samples", cal_args.samples, "calibration samples")
      ->required();
  calibrate->add_option("--params", cal_args.params, "parameter output path")
      ->required();
  calibrate
      ->add_option("--roc-report", cal_args.roc_report,
                   "combined ROC report output path")
      ->required();
  calibrate->add_option("--roc-dir", cal_args.roc_dir,
                        "directory for per-curve ROC files");

  RetrieveArgs ret_args;
  CLI::App* retrieve =
      app.add_subcommand("retrieve", "run the detection cascade over queries");
  retrieve->add_option("--config", ret_args.config, "run configuration file");
  retrieve->add_option("--db", ret_args.db, "database path")->required();
  retrieve->add_option("--params", ret_args.params, "calibrated parameters")
      ->required();
  retrieve->add_option("--queries", ret_args.queries, "query sample file")
      ->required();
  retrieve->add_option("--out", ret_args.out, "detection output path")
      ->required();
  retrieve->add_option("--workers", ret_args.workers,
                       "worker threads (default: config)");

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score detections against matched truth samples");
  evaluate->add_option("--config", eval_args.config, "run configuration file");
  evaluate->add_option("--detections", eval_args.detections, "detection file")
      ->required();
  evaluate->add_option("--truth", eval_args.truth, "truth sample file")
      ->required();
  evaluate->add_option("--report", eval_args.report, "report output path")
      ->required();

  GridArgs grid_args;
  CLI::App* grid = app.add_subcommand(
      "grid", "grid detections onto the global plate-carree raster");
  grid->add_option("--config", grid_args.config, "run configuration file");
  CLI::Option* grid_det =
      grid->add_option("--detections", grid_args.detections, "detection file");
  CLI::Option* grid_merge = grid->add_option(
      "--merge", grid_args.merge, "binary partial grids to merge");
  grid_det->excludes(grid_merge);
  grid_merge->excludes(grid_det);
  grid->add_flag("--occurrence", grid_args.occurrence,
                 "grid the occurrence flag instead of phase indices");
  grid->add_option("--season", grid_args.season, "winter or summer");
  grid->add_option("--out-text", grid_args.out_text, "text raster output");
  grid->add_option("--out-binary", grid_args.out_binary,
                   "binary raster output");
  grid->add_option("--zonal", grid_args.zonal, "zonal mean output");

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate synthetic build and holdout sample files");
  synth->add_option("--manifest", synth_args.manifest, "scenario manifest")
      ->required();
  synth->add_option("--build", synth_args.build, "build stream output")
      ->required();
  synth->add_option("--holdout", synth_args.holdout, "holdout stream output")
      ->required();
  synth->add_flag("--binary", synth_args.binary,
                  "write the binary columnar format");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return NESTKNN_CONFIG_ERROR;
  }

  if (build->parsed()) return run_build(build_args);
  if (calibrate->parsed()) return run_calibrate(cal_args);
  if (retrieve->parsed()) return run_retrieve(ret_args);
  if (evaluate->parsed()) return run_evaluate(eval_args);
  if (grid->parsed()) return run_grid(grid_args);
  if (synth->parsed()) return run_synth(synth_args);
  std::fprintf(stderr, "error: no subcommand\n");
  return NESTKNN_CONFIG_ERROR;
}
