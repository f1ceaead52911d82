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

#ifndef CORRPOOL_LAYERWISE_HPP_
#define CORRPOOL_LAYERWISE_HPP_

#include <utility>
#include <vector>

#include "corrpool/graph.hpp"
#include "corrpool/tensor.hpp"

namespace corrpool {

/// Aligned per-layer representations: layers is (L+1) x T x D, where
/// layer 0 is the convolutional front-end output and layers 1..L are the
/// transformer layers.
struct LayerStack {
  Tensor layers;

  LayerStack() = default;
  explicit LayerStack(Tensor t);

  std::size_t layer_count() const { return layers.dim(0); }
  std::size_t frames() const { return layers.dim(1); }
  std::size_t channels() const { return layers.dim(2); }
};

/// Learnable per-layer mixing logits; effective weights are
/// gamma = softmax(logits), a probability vector over L+1 layers.
struct LayerWeights {
  Parameter logits;

  /// Zero logits: uniform gamma.
  explicit LayerWeights(std::size_t layer_count);

  std::size_t layer_count() const { return logits.value.dim(0); }

  /// Softmax-normalized weights as (layer index, gamma_l) pairs.
  std::vector<std::pair<std::size_t, double>> export_weights() const;

  /// Marks the logits frozen; training steps leave them bitwise unchanged.
  /// Idempotent.
  void freeze();
};

/// Graph node for the weighted layer sum: h_t = sum_l gamma_l * stack[l, t].
/// Differentiable w.r.t. the logits (through the softmax) and the stack.
NodeId aggregate_node(Graph& g, NodeId stack, LayerWeights& weights);

/// Convenience forward-only aggregation.
Tensor aggregate(const LayerStack& stack, LayerWeights& weights);

}  // namespace corrpool

#endif  // CORRPOOL_LAYERWISE_HPP_
