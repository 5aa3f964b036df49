#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "nestknn/nestknn.h"

using testutil::TempDir;

namespace {

// Runs the installed CLI with stdout/stderr captured into files.
int run_cli(const std::string& args, const std::string& out_path,
            const std::string& err_path) {
  const std::string cmd = std::string(NESTKNN_CLI_PATH) + " " + args + " > " +
                          out_path + " 2> " + err_path;
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::uint64_t checksum_of(const std::string& path) {
  std::uint64_t v = 0;
  REQUIRE(nestknn_file_checksum(path.c_str(), &v) == NESTKNN_OK);
  return v;
}

}  // namespace

TEST_CASE("version flag") {
  TempDir dir;
  CHECK(run_cli("--version", dir.file("out"), dir.file("err")) == 0);
  CHECK(testutil::read_text(dir.file("out")).find("1.0.0") !=
        std::string::npos);
}

TEST_CASE("argument and input failures map to exit codes") {
  TempDir dir;
  CHECK(run_cli("--definitely-not-a-flag", dir.file("out"), dir.file("err")) ==
        2);
  CHECK(run_cli("frobnicate", dir.file("out"), dir.file("err")) == 2);
  CHECK(run_cli("build-db", dir.file("out"), dir.file("err")) == 2);

  // Present flags, absent file: a data error.
  CHECK(run_cli("build-db --samples " + dir.file("no.samples") + " --out " +
                    dir.file("no.db"),
                dir.file("out"), dir.file("err")) == 3);
  CHECK(testutil::read_text(dir.file("err")).find("error:") !=
        std::string::npos);

  testutil::write_text(dir.file("bad.conf"), "who_knows = 1\n");
  CHECK(run_cli("build-db --config " + dir.file("bad.conf") + " --samples x" +
                    " --out y",
                dir.file("out"), dir.file("err")) == 2);

  // grid needs a source.
  CHECK(run_cli("grid --out-text " + dir.file("g.txt"), dir.file("out"),
                dir.file("err")) == 2);
}

TEST_CASE("full pipeline through the command line") {
  TempDir dir;
  // Build artifacts must not depend on wall-clock time.
  setenv("SOURCE_DATE_EPOCH", "1700000000", 1);

  testutil::write_text(dir.file("m.manifest"),
                       "scenario = separable\n"
                       "separation_sigma = 2.5\n"
                       "n_per_class = 120\n"
                       "seed = 31\n"
                       "channels = 13\n"
                       "ref_threshold = 0.5\n");
  testutil::write_text(dir.file("run.conf"),
                       "channel_count = 13\n"
                       "database_size = 80\n"
                       "candidate_k = 4, 8, 16, 32\n"
                       "seed = 9\n");

  REQUIRE(run_cli("synth --manifest " + dir.file("m.manifest") + " --build " +
                      dir.file("b.samples") + " --holdout " +
                      dir.file("h.samples"),
                  dir.file("out"), dir.file("err")) == 0);
  std::string out = testutil::read_text(dir.file("out"));
  CHECK(out.find("checksum ") != std::string::npos);
  CHECK(out.find("b.samples") != std::string::npos);

  REQUIRE(run_cli("build-db --config " + dir.file("run.conf") + " --samples " +
                      dir.file("b.samples") + " --out " + dir.file("run.db"),
                  dir.file("out"), dir.file("err")) == 0);
  const auto db_sum = checksum_of(dir.file("run.db"));

  // Same inputs, same database, bit for bit.
  REQUIRE(run_cli("build-db --config " + dir.file("run.conf") + " --samples " +
                      dir.file("b.samples") + " --out " + dir.file("run2.db"),
                  dir.file("out"), dir.file("err")) == 0);
  CHECK(checksum_of(dir.file("run2.db")) == db_sum);

  REQUIRE(run_cli("calibrate --config " + dir.file("run.conf") + " --db " +
                      dir.file("run.db") + " --samples " +
                      dir.file("b.samples") + " --params " +
                      dir.file("run.params") + " --roc-report " +
                      dir.file("roc.txt") + " --roc-dir " + dir.file("roc"),
                  dir.file("out"), dir.file("err")) == 0);
  CHECK(std::filesystem::exists(dir.file("run.params")));
  CHECK(std::filesystem::is_directory(dir.file("roc")));

  REQUIRE(run_cli("retrieve --config " + dir.file("run.conf") + " --db " +
                      dir.file("run.db") + " --params " +
                      dir.file("run.params") + " --queries " +
                      dir.file("h.samples") + " --out " + dir.file("d.det") +
                      " --workers 2",
                  dir.file("out"), dir.file("err")) == 0);
  out = testutil::read_text(dir.file("out"));
  CHECK(out.find("queries=480") != std::string::npos);

  REQUIRE(run_cli("evaluate --config " + dir.file("run.conf") +
                      " --detections " + dir.file("d.det") + " --truth " +
                      dir.file("h.samples") + " --report " +
                      dir.file("eval.txt"),
                  dir.file("out"), dir.file("err")) == 0);
  CHECK(testutil::read_text(dir.file("eval.txt"))
            .find("surface=all,occurrence") != std::string::npos);

  REQUIRE(run_cli("grid --config " + dir.file("run.conf") + " --detections " +
                      dir.file("d.det") + " --out-text " + dir.file("g.txt") +
                      " --out-binary " + dir.file("g.bin") + " --zonal " +
                      dir.file("z.txt"),
                  dir.file("out"), dir.file("err")) == 0);
  const auto grid_sum = checksum_of(dir.file("g.bin"));

  REQUIRE(run_cli("grid --merge " + dir.file("g.bin") + " --out-binary " +
                      dir.file("merged.bin"),
                  dir.file("out"), dir.file("err")) == 0);
  CHECK(checksum_of(dir.file("merged.bin")) == grid_sum);

  // Occurrence mode with a season filter.
  REQUIRE(run_cli("grid --config " + dir.file("run.conf") + " --detections " +
                      dir.file("d.det") + " --occurrence --season winter" +
                      " --out-text " + dir.file("w.txt"),
                  dir.file("out"), dir.file("err")) == 0);

  // An empty query set is a valid run with an empty result.
  std::string header;
  {
    std::string all = testutil::read_text(dir.file("h.samples"));
    header = all.substr(0, all.find('\n') + 1);
  }
  testutil::write_text(dir.file("empty.samples"), header);
  REQUIRE(run_cli("retrieve --config " + dir.file("run.conf") + " --db " +
                      dir.file("run.db") + " --params " +
                      dir.file("run.params") + " --queries " +
                      dir.file("empty.samples") + " --out " +
                      dir.file("empty.det"),
                  dir.file("out"), dir.file("err")) == 0);
  CHECK(testutil::read_text(dir.file("out")).find("queries=0") !=
        std::string::npos);
}
