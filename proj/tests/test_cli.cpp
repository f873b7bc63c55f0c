// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "afcn/checkpoint.hpp"
#include "afcn/dataio.hpp"
#include "afcn/decomposer.hpp"
#include "afcn/model.hpp"
#include "scratch.hpp"

using namespace afcn;
namespace fs = std::filesystem;

namespace {

int afcn_cli(const std::string& args) {
  const std::string cmd = std::string(AFCN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("train: synthetic smoke run writes the summary and per-fold outputs") {
  const ScratchDir dir("cli_train");
  const std::string out = (dir / "run").string();
  REQUIRE(afcn_cli("train --synthetic n=40,N=16,T=128,c=2 --folds 2 --max-epochs 5 --out " + out) == 0);
  const auto summary = slurp(fs::path(out) / "cv_summary.csv");
  CHECK(line_count(fs::path(out) / "cv_summary.csv") == 5);
  CHECK(summary.find("\nmean,") != std::string::npos);
  CHECK(summary.find("\nstd,") != std::string::npos);
  for (const char* f : {"fold_0/metrics.csv", "fold_1/metrics.csv", "fold_0/checkpoint.bin", "resolved_config.json"})
    CHECK(fs::exists(fs::path(out) / f));
  CHECK(line_count(fs::path(out) / "fold_0/metrics.csv") <= 6);
}

TEST_CASE("train: resolved config reproduces the run") {
  const ScratchDir dir("cli_resolved");
  const auto a = dir / "a", b = dir / "b";
  REQUIRE(afcn_cli("train --synthetic n=24,N=8,T=64,c=2,seed=3 --folds 3 --fold 1 --max-epochs 3 --set lambda1=0.5 "
                   "--out " + a.string()) == 0);
  const auto resolved = nlohmann::json::parse(slurp(a / "resolved_config.json"));
  CHECK(resolved["losses"]["lambda1"] == 0.5);
  CHECK(resolved["train"]["max_epochs"] == 3);
  REQUIRE(afcn_cli("train --config " + (a / "resolved_config.json").string() + " --fold 1 --out " + b.string()) == 0);
  CHECK(slurp(a / "fold_1/metrics.csv") == slurp(b / "fold_1/metrics.csv"));
  CHECK(slurp(a / "fold_1/checkpoint.bin") == slurp(b / "fold_1/checkpoint.bin"));
}

TEST_CASE("train: usage and config errors exit with 2") {
  const ScratchDir dir("cli_errors");
  const std::string out = " --out " + (dir / "x").string();
  CHECK(afcn_cli("train --manifest " + (dir / "missing.json").string() + out) == 2);
  CHECK(afcn_cli("train --synthetic n=40,N=16,T=128,c=2 --set nonsense=1" + out) == 2);
  CHECK(afcn_cli("train --synthetic n=40,N=16,T=128,c=2 --set w_low=4" + out) == 2);
  CHECK(afcn_cli("train" + out) == 2);
  CHECK(afcn_cli("train --bogus-flag") == 2);
  CHECK(afcn_cli("") == 2);
}

TEST_CASE("synth, train from manifest, eval and export-adjacency") {
  const ScratchDir dir("cli_pipeline");
  const auto data = dir / "data", run = dir / "run", adj = dir / "adj";
  REQUIRE(afcn_cli("synth --synthetic n=12,N=6,T=64,c=2,seed=5 --out " + data.string()) == 0);
  REQUIRE(fs::exists(data / "manifest.json"));
  REQUIRE(afcn_cli("train --manifest " + (data / "manifest.json").string() +
                   " --folds 3 --fold 0 --max-epochs 2 --set gcn_dims=[8,8] --out " + run.string()) == 0);
  const auto ck = run / "fold_0/checkpoint.bin";
  CHECK(afcn_cli("eval --checkpoint " + ck.string() + " --manifest " + (data / "manifest.json").string() +
                 " --out " + (dir / "pred.csv").string()) == 0);
  CHECK(line_count(dir / "pred.csv") == 13);

  REQUIRE(afcn_cli("export-adjacency --checkpoint " + ck.string() + " --manifest " +
                   (data / "manifest.json").string() + " --out " + adj.string()) == 0);
  const auto [model, params] = restore_model(load_checkpoint(ck));
  const Dataset ds = load_dataset(data / "manifest.json");
  for (std::size_t label = 0; label < 2; ++label) {
    Tensor mean(Shape{24, 24});
    double count = 0.0;
    for (const auto& s : ds.subjects)
      if (s.label == label) {
        const Tensor a = adjacency_parts(params, model, s.x).unified;
        for (std::size_t i = 0; i < a.size(); ++i) mean[i] += a[i];
        count += 1.0;
      }
    for (auto& v : mean.data()) v /= count;
    const Tensor got = read_matrix_csv(adj / ("adjacency_label" + std::to_string(label) + ".csv"));
    CHECK(got.shape() == Shape{24, 24});
    CHECK(max_abs_diff(got, mean) < 1e-12);
  }
  CHECK(slurp(adj / "legend.csv") == "band,row_start,row_end\nL1,0,6\nH1,6,12\nL2,12,18\nH2,18,24\n");

  // A dataset with another T does not fit the checkpoint.
  CHECK(afcn_cli("export-adjacency --checkpoint " + ck.string() + " --synthetic n=4,N=6,T=80,c=2 --out " +
                 adj.string()) == 2);
  {
    // Edit the stored architecture so it no longer matches its hash.
    std::string bytes = slurp(ck);
    const std::string from = "\"cross_dim\":32", to = "\"cross_dim\":31";
    const auto pos = bytes.find(from);
    REQUIRE(pos != std::string::npos);
    bytes.replace(pos, from.size(), to);
    std::ofstream(dir / "tampered.bin", std::ios::binary) << bytes;
  }
  CHECK(afcn_cli("export-adjacency --checkpoint " + (dir / "tampered.bin").string() + " --manifest " +
                 (data / "manifest.json").string() + " --out " + adj.string()) == 2);
}

TEST_CASE("export-adjacency: a single-subject group equals that subject's matrix") {
  const ScratchDir dir("cli_single");
  const auto data = dir / "data", run = dir / "run", adj = dir / "adj";
  REQUIRE(afcn_cli("synth --synthetic n=12,N=6,T=64,c=2,seed=6 --out " + data.string()) == 0);
  REQUIRE(afcn_cli("train --manifest " + (data / "manifest.json").string() +
                   " --folds 3 --fold 0 --max-epochs 1 --out " + run.string()) == 0);
  Dataset ds = load_dataset(data / "manifest.json");
  // Keep one label-0 subject and every label-1 subject.
  const std::string keep = ds.subjects[0].subject_id;
  std::erase_if(ds.subjects, [&](const RoiTimeSeries& s) { return s.label == 0 && s.subject_id != keep; });
  REQUIRE(ds.subjects[0].label == 0);
  write_dataset(ds, dir / "one");
  REQUIRE(afcn_cli("export-adjacency --checkpoint " + (run / "fold_0/checkpoint.bin").string() + " --manifest " +
                   (dir / "one/manifest.json").string() + " --out " + adj.string()) == 0);
  const auto [model, params] = restore_model(load_checkpoint(run / "fold_0/checkpoint.bin"));
  const Tensor expect = adjacency_parts(params, model, ds.subjects[0].x).unified;
  CHECK(max_abs_diff(read_matrix_csv(adj / "adjacency_label0.csv"), expect) < 1e-12);
  CHECK(fs::exists(adj / "adjacency_label1.csv"));
}

TEST_CASE("decompose: shape, fixed-filter init, idempotence and length mismatch") {
  const ScratchDir dir("cli_decompose");
  SynthConfig sc;
  sc.n_subjects = 2;
  sc.n_roi = 5;
  sc.t_len = 64;
  const auto ds = synth_band_dataset(sc).dataset;
  write_matrix_csv(dir / "s.csv", ds.subjects[0].x);
  const auto a = dir / "a.csv", b = dir / "b.csv";
  REQUIRE(afcn_cli("decompose --input " + (dir / "s.csv").string() + " --init-only --init-noise 0 --out " +
                   a.string()) == 0);
  REQUIRE(afcn_cli("decompose --input " + (dir / "s.csv").string() + " --init-only --init-noise 0 --out " +
                   b.string()) == 0);
  CHECK(slurp(a) == slurp(b));
  const Tensor got = read_matrix_csv(a);
  CHECK(got.shape() == Shape{4 * 5, 64});
  const Tensor ref = decompose(zscore_rows(ds.subjects[0].x), init_decomposer(2, 5, 3, 0, 0.0));
  CHECK(max_abs_diff(got, ref.reshaped(Shape{20, 64})) < 1e-12);

  REQUIRE(afcn_cli("train --synthetic n=12,N=5,T=80,c=2 --folds 3 --fold 0 --max-epochs 1 --out " +
                   (dir / "run").string()) == 0);
  CHECK(afcn_cli("decompose --input " + (dir / "s.csv").string() + " --checkpoint " +
                 (dir / "run/fold_0/checkpoint.bin").string() + " --out " + a.string()) == 2);
  CHECK(afcn_cli("decompose --input " + (dir / "s.csv").string() + " --out " + a.string()) == 2);
}
