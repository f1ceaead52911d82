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

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "corrpool/tensor.hpp"

namespace corrpool {

using NodeId = std::size_t;

/// Reverse-mode differentiation over a recorded computation order.
///
/// Every operation appends one node holding its output value, a gradient
/// slot, and a closure that propagates the node's gradient to its inputs.
/// backward() replays the closures in reverse creation order and finally
/// accumulates leaf gradients into their Parameters (trainable ones only).
///
/// The closed op set below is everything the downstream models need; there
/// is no general autodiff over user programs. All outputs are checked finite
/// as they are produced. A graph is intended for a single forward pass
/// followed by at most one backward pass.
class Graph {
 public:
  /// Fixed input; no gradient is propagated past it into user data, but the
  /// slot still exists so tests can inspect input gradients.
  NodeId constant(Tensor value);

  /// Binds a Parameter's current value as a leaf. After backward(), the leaf
  /// gradient is added into p.grad when p.trainable, and p.grad is left
  /// untouched (identically zero unless someone else wrote it) otherwise.
  NodeId leaf(Parameter& p);

  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId relu(NodeId a);
  NodeId sum_all(NodeId a);  // -> scalar

  /// Standard matrix product, rank-2 only: (m x k) * (k x n) -> (m x n).
  NodeId matmul(NodeId a, NodeId b);

  /// Row vector times matrix: (d) * (d x n) -> (n).
  NodeId vecmat(NodeId v, NodeId m);

  /// Matrix times column vector: (n x d) * (d) -> (n).
  NodeId matvec(NodeId m, NodeId v);

  /// Softmax of a rank-1 tensor.
  NodeId softmax_vec(NodeId a);

  /// Weighted sum of layers: stack (L x T x D), gamma (L) -> (T x D).
  NodeId layer_combine(NodeId stack, NodeId gamma);

  /// Per-channel scaling: frames (T x D), scales (D) -> (T x D).
  NodeId channel_scale(NodeId frames, NodeId scales);

  /// Temporal mean: (T x D) -> (D). Requires T >= 1.
  NodeId mean_pool(NodeId frames);

  /// Mean concatenated with population std: (T x D) -> (2D). The std
  /// derivative is clamped to zero on channels whose std <= eps.
  NodeId statistics_pool(NodeId frames, double eps);

  /// Per-channel zero-mean unit-std over time: (T x D) -> (T x D), T >= 2.
  /// Channels with std <= eps map to all zeros with zero gradient.
  NodeId standardize(NodeId frames, double eps);

  /// Strict upper triangle of (1/T) * O'O in row-major (i < j) order:
  /// (T x D) -> (D(D-1)/2).
  NodeId correlation_uppertri(NodeId frames);

  /// Valid (unpadded) dilated 1-D convolution over time. x is (T x Cin),
  /// w is (kernel*Cin x Cout); output is (T - (kernel-1)*dilation) x Cout.
  NodeId conv1d(NodeId x, NodeId w, std::size_t kernel, std::size_t dilation);

  /// L2 normalization of a rank-1 tensor, or of each row of a rank-2 tensor.
  NodeId l2_normalize(NodeId a);

  /// AM-softmax logit shift: out_j = scale * (cos_j - margin * [j == label]).
  NodeId margin_logits(NodeId cosines, std::size_t label, double scale, double margin);

  /// -log softmax(logits)[label], computed with log-sum-exp stabilization.
  NodeId cross_entropy(NodeId logits, std::size_t label);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& gradient(NodeId id) const { return nodes_[id].grad; }
  double scalar_value(NodeId id) const;

  /// Reverse replay from a scalar root seeded with 1.
  void backward(NodeId root) { backward_scaled(root, 1.0); }

  /// Reverse replay from a scalar root seeded with `seed` (used to average
  /// losses over a mini-batch without building a batch graph).
  void backward_scaled(NodeId root, double seed);

  /// Reverse replay from an arbitrary node seeded with an explicit
  /// cotangent. This is the building block for composing per-op backwards
  /// by hand in tests.
  void backward_with_cotangent(NodeId out, const Tensor& cotangent);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Graph&)> backprop;  // empty for constants/leaves
    Parameter* param = nullptr;
  };

  NodeId make_node(const char* op, Tensor value, std::function<void(Graph&)> backprop,
                   Parameter* param = nullptr);
  Tensor& grad_slot(NodeId id) { return nodes_[id].grad; }
  void replay(NodeId root);

  std::vector<Node> nodes_;
};

}  // namespace corrpool
