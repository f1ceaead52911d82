// Copyright 2026  The corrpool authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Exercises the installed binary end to end.  The test runner passes the
// binary location through the CORRPOOL_CLI environment variable.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "corrpool/manifest.hpp"
#include "corrpool/records.hpp"
#include "corrpool/synth.hpp"
#include "corrpool/train.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch_root() {
  fs::path dir = fs::temp_directory_path() / "corrpool_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) return {};
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::trunc);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + p.string());
}

std::string cli_binary() {
  const char* env = std::getenv("CORRPOOL_CLI");
  if (env == nullptr || *env == '\0') {
    throw std::runtime_error("CORRPOOL_CLI is not set; run through ctest");
  }
  return env;
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  fs::path out = scratch_root() / ("stdout_" + std::to_string(counter));
  fs::path err = scratch_root() / ("stderr_" + std::to_string(counter));
  ++counter;
  std::string cmd = "'" + cli_binary() + "' " + args + " >'" + out.string() + "' 2>'" +
                    err.string() + "'";
  int status = std::system(cmd.c_str());
  RunResult r;
  if (status == -1) throw std::runtime_error("system() failed for: " + cmd);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

bool matches(const std::string& text, const std::string& pattern) {
  return std::regex_search(text, std::regex(pattern));
}

// Data and a trained classifier shared by the read-only test cases below.
struct Shared {
  fs::path data_dir;
  fs::path train_dir;
  RunResult gen;
  RunResult train;
};

const Shared& shared() {
  static const Shared s = [] {
    Shared sh;
    fs::path root = scratch_root();
    sh.data_dir = root / "data";
    sh.train_dir = root / "run";
    fs::remove_all(sh.data_dir);
    fs::remove_all(sh.train_dir);

    corrpool::SynthSpec spec;
    spec.regime = corrpool::Regime::kMeanCoded;
    spec.num_classes = 2;
    spec.utterances_per_class = 6;
    spec.val_utterances_per_class = 3;
    spec.t_min = 10;
    spec.t_max = 14;
    spec.dims = 4;
    spec.layers = 2;
    spec.seed = 21;
    spit(root / "spec.json", corrpool::synth_spec_to_json(spec).dump(2));

    sh.gen = run_cli("gen-synth --spec '" + (root / "spec.json").string() + "' --out '" +
                     sh.data_dir.string() + "'");
    if (sh.gen.code != 0) throw std::runtime_error("gen-synth failed:\n" + sh.gen.err);

    nlohmann::json model = {{"proj_dim", 4}, {"post_pool_dim", 4}};
    nlohmann::json cfg = {{"model", model}};
    spit(root / "train.json", cfg.dump(2));
    sh.train = run_cli("train --manifest '" + (sh.data_dir / "train.tsv").string() +
                       "' --val-manifest '" + (sh.data_dir / "val.tsv").string() +
                       "' --config '" + (root / "train.json").string() +
                       "' --out '" + sh.train_dir.string() +
                       "' --pooling mean --epochs 2 --batch-size 4 --lr 0.01 --seed 7");
    if (sh.train.code != 0) throw std::runtime_error("train failed:\n" + sh.train.err);
    return sh;
  }();
  return s;
}

}  // namespace

TEST_SUITE("cli_driver") {

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
  CHECK(run_cli("pool --no-such-flag x").code == 2);
  CHECK(run_cli("gen-synth").code == 2);  // missing required options
  RunResult help = run_cli("--help");
  CHECK(help.code == 0);
  CHECK(contains(help.out, "train"));
  CHECK(contains(help.out, "evaluate"));
  CHECK(run_cli("train --help").code == 0);
}

TEST_CASE("runtime errors exit with code 1 and a message") {
  RunResult r = run_cli("evaluate --ckpt /nonexistent.ckpt --manifest /nonexistent.tsv");
  CHECK(r.code == 1);
  CHECK(contains(r.err, "error:"));
}

TEST_CASE("gen-synth writes the dataset and echoes its configuration") {
  const Shared& sh = shared();
  CHECK(contains(sh.gen.out, "stacks_written 18"));
  CHECK(contains(sh.gen.out, "train_manifest"));
  CHECK(fs::exists(sh.data_dir / "train.tsv"));
  CHECK(fs::exists(sh.data_dir / "val.tsv"));
  CHECK(fs::exists(sh.data_dir / "spec.json"));
  CHECK(fs::exists(sh.data_dir / "ground_truth.json"));
  CHECK(contains(sh.gen.err, "config: "));
  CHECK(contains(sh.gen.err, "\"command\":\"gen-synth\""));
  CHECK(contains(sh.gen.err, "\"seed\":21"));
}

TEST_CASE("train reports progress, percentages, and checkpoint paths") {
  const Shared& sh = shared();
  CHECK(matches(sh.train.out, "best_epoch [0-9]+"));
  CHECK(matches(sh.train.out, "best_val_acc [0-9]+\\.[0-9][0-9]%"));
  CHECK(contains(sh.train.out, "best_checkpoint"));
  CHECK(contains(sh.train.out, "last_checkpoint"));
  CHECK(fs::exists(sh.train_dir / "best.ckpt"));
  CHECK(fs::exists(sh.train_dir / "last.ckpt"));
  CHECK(fs::exists(sh.train_dir / "metrics.tsv"));
  // The resolved config goes to stderr so stdout stays parseable.
  CHECK(contains(sh.train.err, "config: "));
  CHECK(contains(sh.train.err, "\"seed\":7"));
  CHECK(contains(sh.train.err, "\"command\":\"train\""));
  CHECK_FALSE(contains(sh.train.out, "config:"));
  CHECK(matches(sh.train.err, "epoch 1/2"));
  std::vector<corrpool::EpochRecord> log =
      corrpool::read_metric_log(sh.train_dir / "metrics.tsv");
  CHECK(log.size() == 2);
}

TEST_CASE("command-line flags override the config file") {
  const Shared& sh = shared();
  fs::path root = scratch_root();
  nlohmann::json cfg = {{"epochs", 5},
                        {"learning_rate", 0.01},
                        {"pooling", "mean"},
                        {"model", {{"proj_dim", 4}, {"post_pool_dim", 4}}}};
  spit(root / "override.json", cfg.dump());
  fs::path out_dir = root / "override_run";
  fs::remove_all(out_dir);
  RunResult r = run_cli("train --manifest '" + (sh.data_dir / "train.tsv").string() +
                        "' --config '" + (root / "override.json").string() + "' --out '" +
                        out_dir.string() + "' --epochs 1 --seed 7");
  REQUIRE(r.code == 0);
  CHECK(corrpool::read_metric_log(out_dir / "metrics.tsv").size() == 1);
  CHECK(contains(r.err, "\"epochs\":1"));
}

TEST_CASE("evaluate prints accuracy and writes logits") {
  const Shared& sh = shared();
  fs::path logits = scratch_root() / "val.logits";
  RunResult r = run_cli("evaluate --ckpt '" + (sh.train_dir / "best.ckpt").string() +
                        "' --manifest '" + (sh.data_dir / "val.tsv").string() + "' --out '" +
                        logits.string() + "'");
  REQUIRE(r.code == 0);
  CHECK(matches(r.out, "accuracy [0-9]+\\.[0-9][0-9]%"));
  CHECK(contains(r.out, "wrote "));
  std::vector<std::string> names;
  corrpool::LogitSet run = corrpool::read_logits(logits, &names);
  CHECK(run.ids.size() == 6);
  CHECK(names == std::vector<std::string>{"class0", "class1"});
  // Trial lists make no sense for classifier checkpoints.
  RunResult bad = run_cli("evaluate --ckpt '" + (sh.train_dir / "best.ckpt").string() +
                          "' --manifest '" + (sh.data_dir / "val.tsv").string() +
                          "' --trials '" + (sh.data_dir / "val.tsv").string() + "'");
  CHECK(bad.code == 1);
  CHECK(contains(bad.err, "error:"));
}

TEST_CASE("fuse averages logit runs and reports fused accuracy") {
  const Shared& sh = shared();
  fs::path logits = scratch_root() / "fuse_in.logits";
  RunResult eval = run_cli("evaluate --ckpt '" + (sh.train_dir / "best.ckpt").string() +
                           "' --manifest '" + (sh.data_dir / "val.tsv").string() + "' --out '" +
                           logits.string() + "'");
  REQUIRE(eval.code == 0);
  fs::path fused = scratch_root() / "fused.logits";
  RunResult r = run_cli("fuse --scores '" + logits.string() + "' '" + logits.string() +
                        "' --out '" + fused.string() + "'");
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "fused 6 logit records from 2 runs"));
  CHECK(matches(r.out, "accuracy [0-9]+\\.[0-9][0-9]%"));
  CHECK(fs::exists(fused));
  // Self-fusion keeps the accuracy of the single run.
  std::smatch m;
  std::regex acc_re("accuracy ([0-9.]+)%");
  std::string single_out = eval.out, fused_out = r.out;
  REQUIRE(std::regex_search(single_out, m, acc_re));
  std::string single_acc = m[1];
  REQUIRE(std::regex_search(fused_out, m, acc_re));
  CHECK(std::string(m[1]) == single_acc);

  fs::path mismatched = scratch_root() / "mismatch.logits";
  spit(mismatched, "#corrpool-logits\nghost_utt\t1 2\tclass0\n");
  RunResult bad = run_cli("fuse --scores '" + logits.string() + "' '" + mismatched.string() +
                          "'");
  CHECK(bad.code == 1);
  CHECK(contains(bad.err, "error:"));
  RunResult one = run_cli("fuse --scores '" + logits.string() + "'");
  CHECK(one.code == 2);  // --scores requires at least two files
}

TEST_CASE("pool prints one vector per pooling method") {
  const Shared& sh = shared();
  corrpool::Manifest m = corrpool::load_manifest(sh.data_dir / "train.tsv");
  std::string stack = m.entries.front().resolved_path.string();
  auto value_count = [](const std::string& out) {
    std::istringstream ss(out.substr(0, out.find('\n')));
    std::size_t n = 0;
    std::string tok;
    while (ss >> tok) ++n;
    return n;
  };
  RunResult mean = run_cli("pool --pooling mean --stack '" + stack + "'");
  REQUIRE(mean.code == 0);
  CHECK(value_count(mean.out) == 4);
  RunResult meanstd = run_cli("pool --pooling meanstd --stack '" + stack + "'");
  REQUIRE(meanstd.code == 0);
  CHECK(value_count(meanstd.out) == 8);
  RunResult corr = run_cli("pool --pooling corr --stack '" + stack + "'");
  REQUIRE(corr.code == 0);
  CHECK(value_count(corr.out) == 6);
  RunResult layer = run_cli("pool --pooling mean --layer 1 --stack '" + stack + "'");
  CHECK(layer.code == 0);
  CHECK(layer.out != mean.out);  // one layer, not the uniform average
  RunResult bad = run_cli("pool --pooling mean --layer 9 --stack '" + stack + "'");
  CHECK(bad.code == 1);
}

TEST_CASE("gradcheck passes by default and honors the threshold") {
  RunResult pass = run_cli("gradcheck --pooling corr --seed 3");
  REQUIRE(pass.code == 0);
  CHECK(contains(pass.out, "max_relative_error"));
  CHECK(contains(pass.out, "PASS"));
  RunResult sv = run_cli("gradcheck --task sv --pooling meanstd --seed 3");
  CHECK(sv.code == 0);
  RunResult fail = run_cli("gradcheck --pooling corr --seed 3 --threshold 1e-20");
  CHECK(fail.code == 1);
  CHECK(contains(fail.out, "FAIL"));
}

TEST_CASE("export-weights prints the layer table") {
  const Shared& sh = shared();
  RunResult r = run_cli("export-weights --ckpt '" + (sh.train_dir / "best.ckpt").string() +
                        "'");
  REQUIRE(r.code == 0);
  std::istringstream ss(r.out);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "#layer\tweight");
  double sum = 0.0;
  std::size_t rows = 0;
  std::size_t layer;
  double weight;
  while (ss >> layer >> weight) {
    CHECK(layer == rows);
    CHECK(weight >= 0.0);
    CHECK(weight <= 1.0);
    sum += weight;
    ++rows;
  }
  CHECK(rows == 2);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("verification pipeline trains, scores trials, and fuses scores") {
  fs::path root = scratch_root();
  fs::path sv_data = root / "sv_data";
  fs::path sv_run = root / "sv_run";
  fs::remove_all(sv_data);
  fs::remove_all(sv_run);

  corrpool::SynthSpec spec;
  spec.regime = corrpool::Regime::kCorrelationCoded;
  spec.task = corrpool::Task::kSv;
  spec.num_classes = 2;
  spec.utterances_per_class = 4;
  spec.val_utterances_per_class = 2;
  spec.eval_classes = 2;
  spec.eval_utterances_per_class = 2;
  spec.num_trials = 4;
  spec.t_min = 10;
  spec.t_max = 14;
  spec.dims = 4;
  spec.layers = 2;
  spec.seed = 33;
  spit(root / "sv_spec.json", corrpool::synth_spec_to_json(spec).dump());
  RunResult gen = run_cli("gen-synth --spec '" + (root / "sv_spec.json").string() +
                          "' --out '" + sv_data.string() + "'");
  REQUIRE(gen.code == 0);
  CHECK(contains(gen.out, "eval_manifest"));
  CHECK(contains(gen.out, "val_trials"));

  nlohmann::json cfg = {
      {"task", "sv"},
      {"pooling", "meanstd"},
      {"epochs", 1},
      {"batch_size", 4},
      {"learning_rate", 0.001},
      {"model",
       {{"proj_dim", 4},
        {"embed_dim", 4},
        {"tdnn",
         {{{"kernel", 2}, {"dilation", 1}, {"channels", 4}, {"activation", "relu"}}}}}}};
  spit(root / "sv_train.json", cfg.dump());
  RunResult train = run_cli("train --manifest '" + (sv_data / "train.tsv").string() +
                            "' --val-manifest '" + (sv_data / "val.tsv").string() +
                            "' --trials '" + (sv_data / "trials_val.txt").string() +
                            "' --config '" + (root / "sv_train.json").string() + "' --out '" +
                            sv_run.string() + "' --seed 5");
  REQUIRE(train.code == 0);
  CHECK(matches(train.out, "best_val_eer [0-9]+\\.[0-9][0-9]%"));

  // Self-pair targets score cosine 1.0 exactly short of rounding, so a
  // sane embedding map separates them from cross-speaker pairs.
  corrpool::Manifest eval_m = corrpool::load_manifest(sv_data / "eval.tsv");
  std::vector<std::string> a_utts, b_utts;
  for (const auto& e : eval_m.entries) {
    (e.label == eval_m.class_names()[0] ? a_utts : b_utts).push_back(e.utt_id);
  }
  REQUIRE(a_utts.size() == 2);
  REQUIRE(b_utts.size() == 2);
  std::string trials_text = "1 " + a_utts[0] + " " + a_utts[0] + "\n" +
                            "1 " + b_utts[0] + " " + b_utts[0] + "\n" +
                            "0 " + a_utts[0] + " " + b_utts[1] + "\n" +
                            "0 " + b_utts[0] + " " + a_utts[1] + "\n";
  spit(root / "self_trials.txt", trials_text);
  fs::path scores = root / "eval.scores";
  RunResult eval = run_cli("evaluate --ckpt '" + (sv_run / "best.ckpt").string() +
                           "' --manifest '" + (sv_data / "eval.tsv").string() +
                           "' --trials '" + (root / "self_trials.txt").string() + "' --out '" +
                           scores.string() + "'");
  REQUIRE(eval.code == 0);
  CHECK(contains(eval.out, "eer 0.00%"));
  CHECK(corrpool::sniff_record_kind(scores) == corrpool::RecordKind::kScores);

  RunResult fuse = run_cli("fuse --scores '" + scores.string() + "' '" + scores.string() +
                           "'");
  REQUIRE(fuse.code == 0);
  CHECK(contains(fuse.out, "fused 4 score records from 2 runs"));
  CHECK(contains(fuse.out, "eer 0.00%"));

  // Verification checkpoints refuse accuracy-style evaluation.
  RunResult no_trials = run_cli("evaluate --ckpt '" + (sv_run / "best.ckpt").string() +
                                "' --manifest '" + (sv_data / "eval.tsv").string() + "'");
  CHECK(no_trials.code == 1);
}

}  // TEST_SUITE
