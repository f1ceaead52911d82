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

#include "corrpool/layerwise.hpp"

#include "corrpool/error.hpp"

namespace corrpool {

LayerStack::LayerStack(Tensor t) : layers(std::move(t)) {
  if (layers.rank() != 3) {
    throw ShapeError("LayerStack: expected (L+1) x T x D tensor, got shape " +
                     layers.shape_string());
  }
}

namespace {

std::size_t require_layer_count(std::size_t layer_count) {
  if (layer_count == 0) {
    throw ValueError("LayerWeights: need at least one layer");
  }
  return layer_count;
}

}  // namespace

LayerWeights::LayerWeights(std::size_t layer_count)
    : logits("layerwise.logits", Tensor({require_layer_count(layer_count)})) {}

std::vector<std::pair<std::size_t, double>> LayerWeights::export_weights() const {
  Graph g;
  const Tensor& gamma = g.value(g.softmax_vec(g.constant(logits.value)));
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(gamma.size());
  for (std::size_t l = 0; l < gamma.size(); ++l) out.emplace_back(l, gamma[l]);
  return out;
}

void LayerWeights::freeze() { logits.trainable = false; }

NodeId aggregate_node(Graph& g, NodeId stack, LayerWeights& weights) {
  NodeId gamma = g.softmax_vec(g.leaf(weights.logits));
  return g.layer_combine(stack, gamma);
}

Tensor aggregate(const LayerStack& stack, LayerWeights& weights) {
  Graph g;
  return g.value(aggregate_node(g, g.constant(stack.layers), weights));
}

}  // namespace corrpool
