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
#include "corrpool/manifest.hpp"

namespace fs = std::filesystem;
using corrpool::Manifest;
using corrpool::TrialPair;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / "corrpool_manifest_test";
  fs::create_directories(dir);
  return dir;
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::trunc);
  f << text;
  REQUIRE(f.good());
}

// Stack paths in manifests must exist on load; a plain file is enough here.
void touch(const fs::path& p) { spit(p, "x"); }

}  // namespace

TEST_SUITE("manifest") {

TEST_CASE("load resolves relative stack paths against the manifest directory") {
  fs::path dir = temp_dir() / "rel";
  fs::create_directories(dir / "stacks");
  touch(dir / "stacks" / "u1.stack");
  spit(dir / "train.tsv", "u1\tstacks/u1.stack\tspk_a\n");
  Manifest m = corrpool::load_manifest(dir / "train.tsv");
  REQUIRE(m.entries.size() == 1);
  CHECK(m.entries[0].utt_id == "u1");
  CHECK(m.entries[0].stack_path == "stacks/u1.stack");
  CHECK(m.entries[0].label == "spk_a");
  CHECK(m.entries[0].resolved_path == dir / "stacks" / "u1.stack");
}

TEST_CASE("absolute stack paths pass through unchanged") {
  fs::path dir = temp_dir() / "abs";
  fs::create_directories(dir);
  fs::path stack = dir / "u1.stack";
  touch(stack);
  spit(dir / "m.tsv", "u1\t" + stack.string() + "\tspk_a\n");
  Manifest m = corrpool::load_manifest(dir / "m.tsv");
  CHECK(m.entries[0].resolved_path == stack);
}

TEST_CASE("save then load round-trips entries") {
  fs::path dir = temp_dir() / "rt";
  fs::create_directories(dir);
  touch(dir / "a.stack");
  touch(dir / "b.stack");
  Manifest m;
  m.entries = {{"u1", "a.stack", "spk_b", {}}, {"u2", "b.stack", "spk_a", {}}};
  corrpool::save_manifest(dir / "m.tsv", m);
  Manifest back = corrpool::load_manifest(dir / "m.tsv");
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].utt_id == "u1");
  CHECK(back.entries[1].label == "spk_a");
}

TEST_CASE("class names are sorted and deduplicated; indices follow them") {
  Manifest m;
  m.entries = {{"u1", "p", "zeta", {}},
               {"u2", "p", "alpha", {}},
               {"u3", "p", "zeta", {}},
               {"u4", "p", "mid", {}}};
  CHECK(m.class_names() == std::vector<std::string>{"alpha", "mid", "zeta"});
  CHECK(m.class_indices() == std::vector<std::size_t>{2, 0, 2, 1});
}

TEST_CASE("duplicate utterance ids are rejected with the line number") {
  fs::path dir = temp_dir() / "dup";
  fs::create_directories(dir);
  touch(dir / "a.stack");
  spit(dir / "m.tsv", "u1\ta.stack\tx\nu1\ta.stack\ty\n");
  try {
    corrpool::load_manifest(dir / "m.tsv");
    FAIL("expected FormatError");
  } catch (const corrpool::FormatError& e) {
    std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("u1") != std::string::npos);
  }
}

TEST_CASE("malformed rows are rejected") {
  fs::path dir = temp_dir() / "bad";
  fs::create_directories(dir);
  touch(dir / "a.stack");
  spit(dir / "m.tsv", "u1\ta.stack\n");
  CHECK_THROWS_AS(corrpool::load_manifest(dir / "m.tsv"), corrpool::FormatError);
  spit(dir / "m.tsv", "u1\ta.stack\tx\textra\n");
  CHECK_THROWS_AS(corrpool::load_manifest(dir / "m.tsv"), corrpool::FormatError);
  spit(dir / "m.tsv", "u1\t\tx\n");
  CHECK_THROWS_AS(corrpool::load_manifest(dir / "m.tsv"), corrpool::FormatError);
  CHECK_THROWS_AS(corrpool::load_manifest(dir / "absent.tsv"), corrpool::FormatError);
}

TEST_CASE("missing stack files are reported with their resolved path") {
  fs::path dir = temp_dir() / "missing";
  fs::create_directories(dir);
  spit(dir / "m.tsv", "u1\tghost.stack\tx\n");
  try {
    corrpool::load_manifest(dir / "m.tsv");
    FAIL("expected FormatError");
  } catch (const corrpool::FormatError& e) {
    CHECK(std::string(e.what()).find("ghost.stack") != std::string::npos);
  }
}

TEST_CASE("trial files round-trip and validate labels") {
  fs::path dir = temp_dir() / "trials";
  fs::create_directories(dir);
  std::vector<TrialPair> trials = {{true, "e1", "t1"}, {false, "e1", "t2"}};
  corrpool::save_trials(dir / "trials.txt", trials);
  std::vector<TrialPair> back = corrpool::load_trials(dir / "trials.txt");
  REQUIRE(back.size() == 2);
  CHECK(back[0].target);
  CHECK(back[0].enroll == "e1");
  CHECK(back[0].test == "t1");
  CHECK_FALSE(back[1].target);
  CHECK(back[0].trial_id() == "e1:t1");

  spit(dir / "bad.txt", "2 e t\n");
  CHECK_THROWS_AS(corrpool::load_trials(dir / "bad.txt"), corrpool::FormatError);
  spit(dir / "bad.txt", "1 e\n");
  CHECK_THROWS_AS(corrpool::load_trials(dir / "bad.txt"), corrpool::FormatError);
  spit(dir / "bad.txt", "1 e t extra\n");
  CHECK_THROWS_AS(corrpool::load_trials(dir / "bad.txt"), corrpool::FormatError);
  spit(dir / "bad.txt", "\n");
  CHECK_THROWS_AS(corrpool::load_trials(dir / "bad.txt"), corrpool::FormatError);
}

}  // TEST_SUITE
