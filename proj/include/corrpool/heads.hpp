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

#ifndef CORRPOOL_HEADS_HPP_
#define CORRPOOL_HEADS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "corrpool/graph.hpp"
#include "corrpool/layerwise.hpp"
#include "corrpool/pooling.hpp"
#include "corrpool/rng.hpp"
#include "corrpool/tensor.hpp"

namespace corrpool {

/// Downstream task; sid and er share the classifier head, sv uses the
/// verification head.
enum class Task { kSid, kSv, kEr };

Task parse_task(const std::string& name);
std::string task_name(Task t);

enum class Activation { kRelu, kLinear };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

/// One dilated 1-D convolution layer of the frame network (valid padding,
/// no bias).
struct TdnnLayerSpec {
  std::size_t kernel = 1;
  std::size_t dilation = 1;
  std::size_t channels = 1;
  Activation activation = Activation::kRelu;
};

/// Classifier head: frame-wise projection, pooling, optional post-pool
/// projection, and a linear class layer trained with cross-entropy.
struct SidHead {
  Parameter proj;
  std::optional<Parameter> post_proj;
  Parameter classifier;
  PoolingMethod pooling = PoolingMethod::kMean;
  double dropout = 0.0;
  double epsilon = kDefaultEpsilon;
  bool dropout_after_standardize = false;

  std::size_t input_dim() const { return proj.value.dim(0); }
  std::size_t proj_dim() const { return proj.value.dim(1); }
  std::size_t num_classes() const { return classifier.value.dim(1); }
  std::vector<Parameter*> parameters();
};

struct SidConfig {
  std::size_t input_dim = 0;
  std::size_t proj_dim = 256;
  std::size_t num_classes = 0;
  PoolingMethod pooling = PoolingMethod::kMean;
  double dropout = 0.0;
  bool post_pool_proj = false;
  std::size_t post_pool_dim = 256;
  double epsilon = kDefaultEpsilon;
  bool dropout_after_standardize = false;
};

SidHead make_sid_head(const SidConfig& cfg, SeededRng& rng);

/// Verification head: frame-wise projection, dilated-convolution frame
/// network, pooling, and an embedding layer whose pre-nonlinearity output is
/// the speaker embedding, trained with additive-margin softmax.
struct SvHead {
  Parameter proj;
  std::vector<TdnnLayerSpec> tdnn_spec;
  std::vector<Parameter> tdnn;
  Parameter embed;
  Parameter am_weights;
  PoolingMethod pooling = PoolingMethod::kStatistics;
  double dropout = 0.0;
  double am_scale = 30.0;
  double am_margin = 0.4;
  double epsilon = kDefaultEpsilon;
  bool dropout_after_standardize = false;

  std::size_t input_dim() const { return proj.value.dim(0); }
  std::size_t proj_dim() const { return proj.value.dim(1); }
  std::size_t embed_dim() const { return embed.value.dim(1); }
  std::size_t num_classes() const { return am_weights.value.dim(0); }
  /// Frames consumed by the stacked convolutions: 1 + sum (kernel-1)*dilation.
  std::size_t receptive_field() const;
  std::vector<Parameter*> parameters();
};

struct SvConfig {
  std::size_t input_dim = 0;
  std::size_t proj_dim = 512;
  std::vector<TdnnLayerSpec> tdnn;  // empty -> default_tdnn_spec
  std::size_t embed_dim = 512;
  std::size_t num_classes = 0;
  PoolingMethod pooling = PoolingMethod::kStatistics;
  double dropout = 0.0;
  double am_scale = 30.0;
  double am_margin = 0.4;
  double epsilon = kDefaultEpsilon;
  bool dropout_after_standardize = false;
};

/// Five-layer schedule with kernels 5,3,3,1,1 and dilations 1,2,3,1,1;
/// interior layers are `width` channels wide and the last layer is
/// `last_dim` (1500 for statistics pooling, 512 for correlation).
std::vector<TdnnLayerSpec> default_tdnn_spec(std::size_t width, std::size_t last_dim);

SvHead make_sv_head(const SvConfig& cfg, SeededRng& rng);

/// Graph builders.  `mask` is the channel-dropout decision for this pass
/// (null at inference or when dropout is off); it only affects correlation
/// pooling.

NodeId sid_logits_node(Graph& g, NodeId stack, LayerWeights& weights, SidHead& head,
                       const DropoutMask* mask);

NodeId tdnn_frames_node(Graph& g, NodeId frames, SvHead& head);

NodeId sv_embedding_node(Graph& g, NodeId stack, LayerWeights& weights, SvHead& head,
                         const DropoutMask* mask);

NodeId am_softmax_loss_node(Graph& g, NodeId embedding, Parameter& class_weights,
                            std::size_t label, double scale, double margin);

/// Spec-level wrappers.  When `training` is true, correlation-pooling heads
/// with dropout > 0 draw a channel mask from `rng`; otherwise the pass is
/// deterministic.

Tensor sid_forward(const LayerStack& stack, SidHead& head, LayerWeights& weights,
                   bool training, SeededRng& rng);

Tensor tdnn_frame_forward(const Tensor& frames, SvHead& head);

Tensor sv_forward(const LayerStack& stack, SvHead& head, LayerWeights& weights,
                  bool training, SeededRng& rng);

double am_softmax_loss(const Tensor& embedding, Parameter& class_weights, std::size_t label,
                       double scale, double margin);

}  // namespace corrpool

#endif  // CORRPOOL_HEADS_HPP_
