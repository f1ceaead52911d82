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
#include <vector>

#include <doctest.h>

#include "corrpool/error.hpp"
#include "corrpool/optimizer.hpp"
#include "corrpool/rng.hpp"
#include "corrpool/tensor.hpp"

using corrpool::Optimizer;
using corrpool::OptimizerConfig;
using corrpool::OptimizerKind;
using corrpool::Parameter;
using corrpool::SeededRng;
using corrpool::Tensor;

namespace {

Parameter make_param(const std::string& name, std::vector<double> values, bool train = true) {
  std::size_t n = values.size();
  return Parameter(name, Tensor({n}, std::move(values)), train);
}

OptimizerConfig sgd_config(double lr) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::kSgd;
  cfg.learning_rate = lr;
  return cfg;
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("sgd takes the exact gradient step") {
  Parameter p = make_param("w", {1.0, -2.0});
  p.grad[0] = 0.5;
  p.grad[1] = -4.0;
  Optimizer opt(sgd_config(0.1), {&p});
  opt.step();
  CHECK(p.value[0] == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-15));
  CHECK(p.value[1] == doctest::Approx(-2.0 + 0.1 * 4.0).epsilon(1e-15));
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam first step moves by about lr in the gradient sign") {
  // After bias correction the first update is lr * g / (|g| + eps).
  Parameter p = make_param("w", {3.0, -1.0, 0.0});
  p.grad[0] = 0.7;
  p.grad[1] = -200.0;
  p.grad[2] = 0.0;
  OptimizerConfig cfg;
  cfg.learning_rate = 1e-3;
  Optimizer opt(cfg, {&p});
  opt.step();
  CHECK(p.value[0] == doctest::Approx(3.0 - 1e-3).epsilon(1e-6));
  CHECK(p.value[1] == doctest::Approx(-1.0 + 1e-3).epsilon(1e-6));
  CHECK(p.value[2] == 0.0);
}

TEST_CASE("adam matches a hand-rolled reference over several steps") {
  Parameter p = make_param("w", {0.5});
  OptimizerConfig cfg;
  cfg.learning_rate = 0.01;
  Optimizer opt(cfg, {&p});
  double ref = 0.5, m = 0.0, v = 0.0;
  SeededRng rng(55);
  for (int t = 1; t <= 20; ++t) {
    double g = rng.normal();
    p.zero_grad();
    p.grad[0] = g;
    opt.step();
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    double mhat = m / (1.0 - std::pow(0.9, t));
    double vhat = v / (1.0 - std::pow(0.999, t));
    ref -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(p.value[0] == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("frozen parameters are untouched bitwise") {
  Parameter frozen = make_param("f", {0.25, -0.75}, false);
  Parameter live = make_param("w", {1.0, 1.0});
  frozen.grad[0] = frozen.grad[1] = 100.0;
  live.grad[0] = live.grad[1] = 1.0;
  for (OptimizerKind kind : {OptimizerKind::kAdam, OptimizerKind::kSgd}) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    Parameter f = frozen, w = live;
    Optimizer opt(cfg, {&f, &w});
    for (int i = 0; i < 5; ++i) opt.step();
    CHECK(f.value[0] == 0.25);
    CHECK(f.value[1] == -0.75);
    CHECK(w.value[0] != 1.0);
  }
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  Parameter p = make_param("w", {2.0});
  p.grad[0] = 5.0;
  Optimizer opt(sgd_config(0.0), {&p});
  opt.step();
  CHECK(p.value[0] == 2.0);
}

TEST_CASE("restored moments continue a run bitwise") {
  auto drive = [](Optimizer& opt, Parameter& p, SeededRng& rng, int steps) {
    for (int i = 0; i < steps; ++i) {
      p.zero_grad();
      for (std::size_t k = 0; k < p.grad.size(); ++k) p.grad[k] = rng.normal();
      opt.step();
    }
  };
  OptimizerConfig cfg;
  cfg.learning_rate = 0.05;

  Parameter full = make_param("w", {1.0, -1.0, 0.5});
  SeededRng rng_full(77);
  Optimizer opt_full(cfg, {&full});
  drive(opt_full, full, rng_full, 10);

  Parameter half = make_param("w", {1.0, -1.0, 0.5});
  SeededRng rng_half(77);
  Optimizer opt_a(cfg, {&half});
  drive(opt_a, half, rng_half, 5);
  std::vector<Tensor> m = opt_a.moment1(), v = opt_a.moment2();
  Optimizer opt_b(cfg, {&half});
  opt_b.restore(opt_a.steps(), std::move(m), std::move(v));
  drive(opt_b, half, rng_half, 5);

  CHECK(half.value.raw() == full.value.raw());
  CHECK(opt_b.steps() == opt_full.steps());
}

TEST_CASE("restore validates shapes and counts") {
  Parameter p = make_param("w", {1.0, 2.0});
  OptimizerConfig cfg;
  Optimizer opt(cfg, {&p});
  CHECK_THROWS_AS(opt.restore(3, {}, {}), corrpool::ValueError);
  std::vector<Tensor> bad;
  bad.emplace_back(std::vector<std::size_t>{3});
  CHECK_THROWS_AS(opt.restore(3, bad, bad), corrpool::ValueError);
  Optimizer sgd(sgd_config(0.1), {&p});
  std::vector<Tensor> one;
  one.emplace_back(std::vector<std::size_t>{2});
  CHECK_THROWS_AS(sgd.restore(3, one, one), corrpool::ValueError);
  CHECK_NOTHROW(sgd.restore(3, {}, {}));
  CHECK(sgd.steps() == 3);
}

TEST_CASE("invalid configurations are rejected") {
  Parameter p = make_param("w", {1.0});
  OptimizerConfig cfg;
  cfg.learning_rate = -0.1;
  CHECK_THROWS_AS(Optimizer(cfg, {&p}), corrpool::ValueError);
  cfg = OptimizerConfig{};
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(Optimizer(cfg, {&p}), corrpool::ValueError);
  cfg = OptimizerConfig{};
  cfg.eps = 0.0;
  CHECK_THROWS_AS(Optimizer(cfg, {&p}), corrpool::ValueError);
}

TEST_CASE("a step that produces non-finite values is reported") {
  Parameter p = make_param("w", {1e308});
  p.grad[0] = -1e308;
  Optimizer opt(sgd_config(10.0), {&p});
  CHECK_THROWS_AS(opt.step(), corrpool::NumericError);
}

TEST_CASE("optimizer names parse and round trip") {
  CHECK(corrpool::parse_optimizer("adam") == OptimizerKind::kAdam);
  CHECK(corrpool::parse_optimizer("sgd") == OptimizerKind::kSgd);
  CHECK(corrpool::optimizer_name(OptimizerKind::kAdam) == "adam");
  CHECK_THROWS_AS(corrpool::parse_optimizer("rmsprop"), corrpool::ValueError);
}

}  // TEST_SUITE
