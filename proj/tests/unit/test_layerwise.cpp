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
#include "corrpool/graph.hpp"
#include "corrpool/layerwise.hpp"
#include "corrpool/optimizer.hpp"
#include "corrpool/rng.hpp"
#include "corrpool/tensor.hpp"
#include "oracles.hpp"

using corrpool::Graph;
using corrpool::LayerStack;
using corrpool::LayerWeights;
using corrpool::SeededRng;
using corrpool::Tensor;

namespace {

LayerStack random_stack(std::size_t l, std::size_t t, std::size_t d, SeededRng& rng) {
  Tensor s({l, t, d});
  for (double& v : s.raw()) v = rng.normal();
  return LayerStack(std::move(s));
}

}  // namespace

TEST_SUITE("layerwise") {

TEST_CASE("zero logits average the layers uniformly") {
  SeededRng rng(3);
  LayerStack stack = random_stack(3, 4, 2, rng);
  LayerWeights w(3);
  Tensor out = corrpool::aggregate(stack, w);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t d = 0; d < 2; ++d) {
      double avg = (stack.layers.at3(0, t, d) + stack.layers.at3(1, t, d) +
                    stack.layers.at3(2, t, d)) / 3.0;
      CHECK(out.at2(t, d) == doctest::Approx(avg).epsilon(1e-12));
    }
  }
}

TEST_CASE("logits [ln 2, 0] give weights [2/3, 1/3]") {
  LayerWeights w(2);
  w.logits.value[0] = std::log(2.0);
  auto rows = w.export_weights();
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].first == 0);
  CHECK(rows[0].second == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(rows[1].second == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("aggregate matches the loop oracle") {
  SeededRng rng(5);
  LayerStack stack = random_stack(4, 6, 5, rng);
  LayerWeights w(4);
  for (double& v : w.logits.value.raw()) v = rng.normal();
  std::vector<double> gamma = oracles::softmax(w.logits.value.raw());
  Tensor want = oracles::weighted_layer_sum(stack.layers, gamma);
  Tensor got = corrpool::aggregate(stack, w);
  REQUIRE(got.same_shape(want));
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("freezing stops training and is idempotent") {
  SeededRng rng(7);
  LayerStack stack = random_stack(3, 5, 4, rng);
  LayerWeights w(3);
  for (double& v : w.logits.value.raw()) v = rng.normal();
  w.freeze();
  w.freeze();
  CHECK_FALSE(w.logits.trainable);

  Tensor before = w.logits.value;
  corrpool::OptimizerConfig oc;
  corrpool::Optimizer opt(oc, {&w.logits});
  for (int step = 0; step < 100; ++step) {
    w.logits.zero_grad();
    Graph g;
    g.backward(g.sum_all(corrpool::aggregate_node(g, g.constant(stack.layers), w)));
    opt.step();
  }
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(w.logits.value[i] == before[i]);
}

TEST_CASE("exported weights form a probability vector") {
  LayerWeights uniform(25);
  auto rows = uniform.export_weights();
  REQUIRE(rows.size() == 25);
  for (const auto& [idx, weight] : rows) CHECK(weight == doctest::Approx(0.04).epsilon(1e-12));

  LayerWeights peaked(5);
  peaked.logits.value[2] = 20.0;
  auto peak_rows = peaked.export_weights();
  CHECK(peak_rows[2].second > 0.999);
  double sum = 0.0;
  for (const auto& [idx, weight] : peak_rows) {
    CHECK(weight >= 0.0);
    sum += weight;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("aggregate is linear in the stack") {
  SeededRng rng(11);
  LayerStack s1 = random_stack(3, 4, 3, rng);
  LayerStack s2 = random_stack(3, 4, 3, rng);
  LayerWeights w(3);
  for (double& v : w.logits.value.raw()) v = rng.normal();
  const double a = 1.7, b = -0.4;
  Tensor mixed({3, 4, 3});
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    mixed[i] = a * s1.layers[i] + b * s2.layers[i];
  }
  Tensor left = corrpool::aggregate(LayerStack(std::move(mixed)), w);
  Tensor o1 = corrpool::aggregate(s1, w);
  Tensor o2 = corrpool::aggregate(s2, w);
  for (std::size_t i = 0; i < left.size(); ++i) {
    CHECK(left[i] == doctest::Approx(a * o1[i] + b * o2[i]).epsilon(1e-12));
  }
}

TEST_CASE("adding a constant to all logits changes nothing") {
  SeededRng rng(13);
  LayerStack stack = random_stack(4, 3, 2, rng);
  LayerWeights w(4);
  for (double& v : w.logits.value.raw()) v = rng.normal();
  Tensor base = corrpool::aggregate(stack, w);
  for (double& v : w.logits.value.raw()) v += 7.25;
  Tensor shifted = corrpool::aggregate(stack, w);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(base[i] == doctest::Approx(shifted[i]).epsilon(1e-12));
  }
}

TEST_CASE("shape validation") {
  SeededRng rng(17);
  LayerStack stack = random_stack(3, 4, 2, rng);
  LayerWeights w(4);
  CHECK_THROWS_AS(corrpool::aggregate(stack, w), corrpool::ShapeError);
  CHECK_THROWS_AS(LayerStack(Tensor({3, 4})), corrpool::ShapeError);
  CHECK_THROWS_AS(LayerWeights(0), corrpool::ValueError);
}

}  // TEST_SUITE
