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

#ifndef CORRPOOL_MODEL_HPP_
#define CORRPOOL_MODEL_HPP_

#include <optional>
#include <string>
#include <vector>

#include "corrpool/heads.hpp"
#include "corrpool/layerwise.hpp"

namespace corrpool {

/// Fully resolved model architecture.  Unlike the training configuration,
/// every field here is concrete (task defaults and "auto" choices applied),
/// so a checkpoint can be rebuilt without the original dataset.
struct ModelConfig {
  Task task = Task::kSid;
  PoolingMethod pooling = PoolingMethod::kMean;
  std::size_t input_dim = 0;  // stack channel count D
  std::size_t layers = 0;     // stack layer count L+1
  std::size_t num_classes = 0;
  double dropout = 0.0;
  std::size_t proj_dim = 0;
  bool post_pool_proj = false;     // classifier head only
  std::size_t post_pool_dim = 256;
  std::vector<TdnnLayerSpec> tdnn;  // verification head only
  std::size_t embed_dim = 512;
  double am_scale = 30.0;
  double am_margin = 0.4;
  double epsilon = kDefaultEpsilon;
  bool dropout_after_standardize = false;
};

/// Layer weights plus the task head, with stable parameter naming for
/// checkpoints ("layerwise.logits", "proj", "post_proj", "classifier",
/// "tdnn.N", "embed", "am_weights").
class Model {
 public:
  /// Fresh parameter initialization from the RNG.
  Model(ModelConfig cfg, std::vector<std::string> class_names, SeededRng& rng);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  LayerWeights& layer_weights() { return lw_; }
  SidHead& sid_head();
  SvHead& sv_head();
  bool is_classifier() const { return cfg_.task != Task::kSv; }

  /// Stable order: layerwise logits first, then head parameters.
  std::vector<Parameter*> parameters();

  /// True when training passes need a channel-dropout mask.
  bool wants_dropout_mask() const;
  /// Channel count the mask applies to (the pooled feature channels).
  std::size_t mask_dim() const;
  DropoutMask draw_mask(SeededRng& rng) const;

  /// Scalar training loss (cross-entropy or additive-margin softmax).
  NodeId loss_node(Graph& g, const Tensor& stack, std::size_t label, const DropoutMask* mask);

  /// Inference-mode outputs (no dropout).
  Tensor logits(const LayerStack& stack);
  Tensor embedding(const LayerStack& stack);

 private:
  ModelConfig cfg_;
  std::vector<std::string> class_names_;
  LayerWeights lw_;
  std::optional<SidHead> sid_;
  std::optional<SvHead> sv_;
};

/// Applies task defaults: proj_dim 256 (classifier) or 512 (verification),
/// post-pool projection on exactly for correlation-pooled classifiers when
/// `post_pool_proj` is "auto", default frame network when `tdnn` is empty.
ModelConfig resolve_model_config(ModelConfig cfg, const std::string& post_pool_proj_mode);

/// Central-difference check of the full loss gradient w.r.t. every model
/// parameter on one (stack, label) instance with an optional fixed dropout
/// mask.  Returns the max relative error.
double model_grad_check(Model& model, const Tensor& stack, std::size_t label,
                        const DropoutMask* mask, double eps);

}  // namespace corrpool

#endif  // CORRPOOL_MODEL_HPP_
