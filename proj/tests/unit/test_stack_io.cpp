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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>

#include "corrpool/error.hpp"
#include "corrpool/layerwise.hpp"
#include "corrpool/rng.hpp"
#include "corrpool/stack_io.hpp"
#include "corrpool/tensor.hpp"

namespace fs = std::filesystem;
using corrpool::LayerStack;
using corrpool::SeededRng;
using corrpool::Tensor;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / "corrpool_stack_io_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  REQUIRE(f.good());
}

LayerStack random_stack(std::size_t layers, std::size_t frames, std::size_t dims,
                        std::uint64_t seed) {
  Tensor t({layers, frames, dims});
  SeededRng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * 3.0;
  return LayerStack(std::move(t));
}

}  // namespace

TEST_SUITE("stack_io") {

TEST_CASE("round trip preserves values to single-precision accuracy") {
  fs::path p = temp_dir() / "roundtrip.stack";
  LayerStack orig = random_stack(3, 17, 5, 101);
  corrpool::write_stack(p, orig);
  LayerStack back = corrpool::read_stack(p);
  REQUIRE(back.layers.same_shape(orig.layers));
  for (std::size_t i = 0; i < orig.layers.size(); ++i) {
    double tol = 6e-8 * std::max(1.0, std::abs(orig.layers[i]));
    CHECK(std::abs(back.layers[i] - orig.layers[i]) <= tol);
  }
}

TEST_CASE("written bytes are deterministic and re-reading is stable") {
  fs::path p1 = temp_dir() / "det1.stack";
  fs::path p2 = temp_dir() / "det2.stack";
  LayerStack s = random_stack(2, 9, 4, 7);
  corrpool::write_stack(p1, s);
  corrpool::write_stack(p2, s);
  CHECK(slurp(p1) == slurp(p2));
  // Values already quantized to f32 survive a second trip exactly.
  LayerStack once = corrpool::read_stack(p1);
  fs::path p3 = temp_dir() / "det3.stack";
  corrpool::write_stack(p3, once);
  CHECK(slurp(p3) == slurp(p1));
}

TEST_CASE("header layout is magic plus three little-endian u32 dims") {
  fs::path p = temp_dir() / "layout.stack";
  Tensor t({1, 2, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  corrpool::write_stack(p, LayerStack(t));
  std::string bytes = slurp(p);
  REQUIRE(bytes.size() == 20 + 4 * 6);
  CHECK(bytes.substr(0, 8) == "CPSTACK1");
  auto u32 = [&](std::size_t off) {
    auto b = [&](std::size_t i) {
      return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i]));
    };
    return b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
  };
  CHECK(u32(8) == 1);
  CHECK(u32(12) == 2);
  CHECK(u32(16) == 3);
}

TEST_CASE("bad magic is rejected") {
  fs::path p = temp_dir() / "magic.stack";
  LayerStack s = random_stack(1, 2, 2, 3);
  corrpool::write_stack(p, s);
  std::string bytes = slurp(p);
  bytes[0] = 'X';
  spit(p, bytes);
  try {
    corrpool::read_stack(p);
    FAIL("expected FormatError");
  } catch (const corrpool::FormatError& e) {
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }
}

TEST_CASE("truncation errors report the offset") {
  fs::path p = temp_dir() / "trunc.stack";
  LayerStack s = random_stack(1, 3, 2, 5);
  corrpool::write_stack(p, s);
  std::string bytes = slurp(p);
  spit(p, bytes.substr(0, bytes.size() - 5));
  try {
    corrpool::read_stack(p);
    FAIL("expected FormatError");
  } catch (const corrpool::FormatError& e) {
    std::string msg = e.what();
    CHECK(msg.find(std::to_string(bytes.size() - 5)) != std::string::npos);
    CHECK(msg.find(std::to_string(bytes.size())) != std::string::npos);
  }
  // A file shorter than the header is rejected too.
  spit(p, bytes.substr(0, 10));
  CHECK_THROWS_AS(corrpool::read_stack(p), corrpool::FormatError);
}

TEST_CASE("trailing bytes are rejected") {
  fs::path p = temp_dir() / "trailing.stack";
  LayerStack s = random_stack(2, 2, 2, 11);
  corrpool::write_stack(p, s);
  std::string bytes = slurp(p);
  std::size_t clean_size = bytes.size();
  spit(p, bytes + "junk");
  try {
    corrpool::read_stack(p);
    FAIL("expected FormatError");
  } catch (const corrpool::FormatError& e) {
    std::string msg = e.what();
    CHECK(msg.find("trailing") != std::string::npos);
    CHECK(msg.find(std::to_string(clean_size)) != std::string::npos);
  }
}

TEST_CASE("zero dimensions in the header are rejected") {
  fs::path p = temp_dir() / "zerodim.stack";
  LayerStack s = random_stack(1, 1, 1, 13);
  corrpool::write_stack(p, s);
  std::string bytes = slurp(p);
  bytes[8] = bytes[9] = bytes[10] = bytes[11] = 0;
  spit(p, bytes);
  try {
    corrpool::read_stack(p);
    FAIL("expected FormatError");
  } catch (const corrpool::FormatError& e) {
    CHECK(std::string(e.what()).find("offset 8") != std::string::npos);
  }
}

TEST_CASE("missing file and non-stack rank are rejected") {
  CHECK_THROWS_AS(corrpool::read_stack(temp_dir() / "no_such.stack"),
                  corrpool::FormatError);
  Tensor flat({2, 3});
  flat.fill(1.0);
  LayerStack bogus{};
  bogus.layers = flat;
  CHECK_THROWS_AS(corrpool::write_stack(temp_dir() / "rank.stack", bogus),
                  corrpool::ShapeError);
}

}  // TEST_SUITE
