#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cstalign/config.hpp"
#include "cstalign/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto p = fs::temp_directory_path() / "cst_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(CST_CLI_PATH) + " " + args + " > " +
                          (workdir() / "stdout.txt").string() + " 2> " + (workdir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string p(const std::string& name) { return (workdir() / name).string(); }

// Tiny model so every subcommand finishes in a second or two.
const std::string kSmall =
    " --epochs 2 --set batch_size=4 --set peak_lr=3e-3 --set vocab_size=128 --set text_embed_dim=8"
    " --set image_hidden=8 --set text_hidden=none --set embed_dim=4 --set context_length=24";

const std::string kGen =
    " --crops 3 --conditions 2 --classes 5 --samples-per-class 12 --feature-dim 6 --noise 0.2";

}  // namespace

TEST_CASE("full workflow exits 0") {
  REQUIRE(run("gen-data --out " + p("data.txt") + kGen + " --seed 3 --write-vocab " + p("vocab.tsv")) == 0);
  CHECK(fs::exists(p("data.txt")));
  CHECK(fs::exists(p("vocab.tsv")));

  REQUIRE(run("train --data " + p("data.txt") + " --out " + p("run") + kSmall + " --alpha 0.2") == 0);
  for (const char* f : {"checkpoint.bin", "train_log.jsonl", "metrics.jsonl", "run_manifest.json", "config.txt"})
    CHECK(fs::exists(workdir() / "run" / f));
  CHECK(cstalign::parse_config(workdir() / "run" / "config.txt").alpha == 0.2);

  REQUIRE(run("eval --data " + p("data.txt") + " --checkpoint " + p("run/checkpoint.bin") + " --out " +
              p("eval.jsonl") + " --probe-shots 1 --probe-runs 2 --config " + p("run/config.txt")) == 0);
  const auto m = cstalign::read_metrics(workdir() / "eval.jsonl");
  CHECK(m.config_hash == cstalign::read_metrics(workdir() / "run" / "metrics.jsonl").config_hash);
  CHECK(m.find("probe_accuracy_mean", "", "shots=1") != nullptr);

  REQUIRE(run("report " + p("run") + " " + p("eval.jsonl") + " --out " + p("report.txt")) == 0);
  const auto report = slurp(workdir() / "report.txt");
  CHECK(report.find("R@10") != std::string::npos);
  CHECK(report.find(m.config_hash) != std::string::npos);

  REQUIRE(run("ablate --data " + p("data.txt") + " --out " + p("abl") + kSmall) == 0);
  for (const char* cell : {"short-hard", "short-cst", "long-hard", "long-cst"})
    CHECK(fs::exists(workdir() / "abl" / cell / "metrics.jsonl"));
  CHECK(fs::exists(workdir() / "abl" / "ablation_report.txt"));

  // Gen-data from a vocabulary file.
  REQUIRE(run("gen-data --out " + p("data2.txt") + " --vocab " + p("vocab.tsv") +
              " --samples-per-class 10 --feature-dim 4") == 0);

  // Forced scalar kernels.
  CHECK(run("--simd scalar train --data " + p("data.txt") + " --out " + p("run_scalar") + kSmall) == 0);
  CHECK(run("--help") == 0);
}

TEST_CASE("config errors exit 2") {
  CHECK(run("train --bogus-flag") == 2);
  CHECK(run("") == 2);
  std::ofstream(p("bad.cfg")) << "alpha = 1.5\n";
  CHECK(run("train --data " + p("data.txt") + " --out " + p("x") + " --config " + p("bad.cfg")) == 2);
  CHECK(slurp(workdir() / "stderr.txt").find("alpha") != std::string::npos);
  CHECK(run("train --data " + p("data.txt") + " --out " + p("x") + " --set nonsense=1") == 2);
  CHECK(run("gen-data --out " + p("y.txt") + " --preset unknown") == 2);
}

TEST_CASE("data errors exit 3") {
  CHECK(run("train --data " + p("does_not_exist.txt") + " --out " + p("z")) == 3);
  std::ofstream(p("dangling.txt")) << "cstalign-manifest v1 feature_dim=2 K=1 N=1\n"
                                      "apple\tscab\tspots\n"
                                      "0\ttrain\t99\t1 2\n";
  CHECK(run("train --data " + p("dangling.txt") + " --out " + p("z")) == 3);
  CHECK(run("report " + p("does_not_exist.jsonl")) == 3);
}
