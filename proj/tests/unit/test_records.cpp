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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "corrpool/error.hpp"
#include "corrpool/records.hpp"

namespace fs = std::filesystem;
using corrpool::EpochRecord;
using corrpool::LogitSet;
using corrpool::RecordKind;
using corrpool::ScoreSet;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / "corrpool_records_test";
  fs::create_directories(dir);
  return dir;
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::trunc);
  f << text;
  REQUIRE(f.good());
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("records") {

TEST_CASE("format_double survives a parse round trip exactly") {
  for (double v : {1.0 / 3.0, 1e-300, -2.5, 0.1 + 0.2, 123456789.123456789, 0.0}) {
    CHECK(std::stod(corrpool::format_double(v)) == v);
  }
  CHECK(corrpool::format_double(2.0) == "2");
}

TEST_CASE("metric log round trip is exact") {
  fs::path p = temp_dir() / "metrics.tsv";
  std::vector<EpochRecord> rows = {{1, 1.0 / 3.0, 0.25}, {2, 0.1 + 0.2, 1e-17}};
  corrpool::write_metric_log(p, rows);
  std::vector<EpochRecord> back = corrpool::read_metric_log(p);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].epoch == rows[i].epoch);
    CHECK(back[i].train_loss == rows[i].train_loss);
    CHECK(back[i].val_metric == rows[i].val_metric);
  }
}

TEST_CASE("metric log is tab-separated with one row per epoch") {
  fs::path p = temp_dir() / "layout.tsv";
  corrpool::write_metric_log(p, {{3, 0.5, 0.75}});
  CHECK(slurp(p) == "3\t0.5\t0.75\n");
}

TEST_CASE("metric log rejects malformed rows") {
  fs::path p = temp_dir() / "bad.tsv";
  spit(p, "1\t0.5\n");
  CHECK_THROWS_AS(corrpool::read_metric_log(p), corrpool::FormatError);
  spit(p, "1\tx\t0.5\n");
  try {
    corrpool::read_metric_log(p);
    FAIL("expected FormatError");
  } catch (const corrpool::FormatError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  CHECK_THROWS_AS(corrpool::read_metric_log(temp_dir() / "absent.tsv"),
                  corrpool::FormatError);
}

TEST_CASE("logits round trip preserves values, ids, labels, and class names") {
  fs::path p = temp_dir() / "run.logits";
  LogitSet run;
  run.ids = {"utt_a", "utt_b"};
  run.logits = {{1.0 / 3.0, -2.0}, {0.0, 1e-12}};
  run.labels = {"spk1", "spk2"};
  corrpool::write_logits(p, run, {"spk1", "spk2"});
  std::vector<std::string> names;
  LogitSet back = corrpool::read_logits(p, &names);
  CHECK(back.ids == run.ids);
  CHECK(back.logits == run.logits);
  CHECK(back.labels == run.labels);
  CHECK(names == std::vector<std::string>{"spk1", "spk2"});
}

TEST_CASE("logits without labels use a question-mark placeholder") {
  fs::path p = temp_dir() / "nolabel.logits";
  LogitSet run;
  run.ids = {"u"};
  run.logits = {{0.5}};
  corrpool::write_logits(p, run, {});
  LogitSet back = corrpool::read_logits(p);
  REQUIRE(back.labels.size() == 1);
  CHECK(back.labels[0] == "?");
}

TEST_CASE("logits reader rejects malformed rows and empty files") {
  fs::path p = temp_dir() / "bad.logits";
  spit(p, "#corrpool-logits\nutt\t1.0 nan_or_not\tx\n");
  CHECK_THROWS_AS(corrpool::read_logits(p), corrpool::FormatError);
  spit(p, "#corrpool-logits\nutt_only_two_fields\tx\n");
  CHECK_THROWS_AS(corrpool::read_logits(p), corrpool::FormatError);
  spit(p, "#corrpool-logits\n");
  CHECK_THROWS_AS(corrpool::read_logits(p), corrpool::FormatError);
}

TEST_CASE("scores round trip is exact") {
  fs::path p = temp_dir() / "run.scores";
  ScoreSet scores = {{"e1:t1", 1.0 / 7.0, true}, {"e1:t2", -0.25, false}};
  corrpool::write_scores(p, scores);
  ScoreSet back = corrpool::read_scores(p);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "e1:t1");
  CHECK(back[0].score == scores[0].score);
  CHECK(back[0].target);
  CHECK_FALSE(back[1].target);
}

TEST_CASE("scores reader rejects unknown labels") {
  fs::path p = temp_dir() / "bad.scores";
  spit(p, "#corrpool-scores\ne:t\t0.5\timpostor\n");
  try {
    corrpool::read_scores(p);
    FAIL("expected FormatError");
  } catch (const corrpool::FormatError& e) {
    CHECK(std::string(e.what()).find("impostor") != std::string::npos);
  }
}

TEST_CASE("record kind sniffing") {
  fs::path p = temp_dir() / "sniff";
  spit(p, "#corrpool-logits\nu\t1 2\tx\n");
  CHECK(corrpool::sniff_record_kind(p) == RecordKind::kLogits);
  spit(p, "#corrpool-scores\ne:t\t0.5\ttarget\n");
  CHECK(corrpool::sniff_record_kind(p) == RecordKind::kScores);
  // Headerless files are classified by the shape of the first record.
  spit(p, "e:t\t0.5\tnontarget\n");
  CHECK(corrpool::sniff_record_kind(p) == RecordKind::kScores);
  spit(p, "u\t1 2 3\tspk1\n");
  CHECK(corrpool::sniff_record_kind(p) == RecordKind::kLogits);
  spit(p, "\n\n");
  CHECK_THROWS_AS(corrpool::sniff_record_kind(p), corrpool::FormatError);
}

TEST_CASE("comment and blank lines are skipped everywhere") {
  fs::path p = temp_dir() / "comments.tsv";
  spit(p, "# a comment\n\n1\t0.5\t0.25\n");
  std::vector<EpochRecord> rows = corrpool::read_metric_log(p);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].epoch == 1);
}

}  // TEST_SUITE
