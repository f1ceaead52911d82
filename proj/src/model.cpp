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

#include "corrpool/model.hpp"

#include "corrpool/error.hpp"
#include "corrpool/gradcheck.hpp"

namespace corrpool {

ModelConfig resolve_model_config(ModelConfig cfg, const std::string& post_pool_proj_mode) {
  if (cfg.proj_dim == 0) {
    cfg.proj_dim = cfg.task == Task::kSv ? 512 : 256;
  }
  if (post_pool_proj_mode == "auto") {
    cfg.post_pool_proj = cfg.task != Task::kSv && cfg.pooling == PoolingMethod::kCorrelation;
  } else if (post_pool_proj_mode == "on") {
    cfg.post_pool_proj = true;
  } else if (post_pool_proj_mode == "off") {
    cfg.post_pool_proj = false;
  } else {
    throw ValueError("post_pool_proj must be auto|on|off, got '" + post_pool_proj_mode + "'");
  }
  if (cfg.task == Task::kSv && cfg.tdnn.empty()) {
    cfg.tdnn = default_tdnn_spec(
        512, cfg.pooling == PoolingMethod::kCorrelation ? 512 : 1500);
  }
  return cfg;
}

Model::Model(ModelConfig cfg, std::vector<std::string> class_names, SeededRng& rng)
    : cfg_(std::move(cfg)), class_names_(std::move(class_names)), lw_(cfg_.layers) {
  if (cfg_.num_classes == 0) throw ValueError("Model: num_classes must be positive");
  if (!class_names_.empty() && class_names_.size() != cfg_.num_classes) {
    throw ValueError("Model: " + std::to_string(class_names_.size()) +
                     " class names for " + std::to_string(cfg_.num_classes) + " classes");
  }
  if (cfg_.task == Task::kSv) {
    SvConfig sc;
    sc.input_dim = cfg_.input_dim;
    sc.proj_dim = cfg_.proj_dim;
    sc.tdnn = cfg_.tdnn;
    sc.embed_dim = cfg_.embed_dim;
    sc.num_classes = cfg_.num_classes;
    sc.pooling = cfg_.pooling;
    sc.dropout = cfg_.dropout;
    sc.am_scale = cfg_.am_scale;
    sc.am_margin = cfg_.am_margin;
    sc.epsilon = cfg_.epsilon;
    sc.dropout_after_standardize = cfg_.dropout_after_standardize;
    sv_.emplace(make_sv_head(sc, rng));
    cfg_.tdnn = sv_->tdnn_spec;  // keep the resolved schedule
  } else {
    SidConfig sc;
    sc.input_dim = cfg_.input_dim;
    sc.proj_dim = cfg_.proj_dim;
    sc.num_classes = cfg_.num_classes;
    sc.pooling = cfg_.pooling;
    sc.dropout = cfg_.dropout;
    sc.post_pool_proj = cfg_.post_pool_proj;
    sc.post_pool_dim = cfg_.post_pool_dim;
    sc.epsilon = cfg_.epsilon;
    sc.dropout_after_standardize = cfg_.dropout_after_standardize;
    sid_.emplace(make_sid_head(sc, rng));
  }
}

SidHead& Model::sid_head() {
  if (!sid_) throw ValueError("Model: no classifier head on a verification model");
  return *sid_;
}

SvHead& Model::sv_head() {
  if (!sv_) throw ValueError("Model: no verification head on a classifier model");
  return *sv_;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out{&lw_.logits};
  std::vector<Parameter*> head = sid_ ? sid_->parameters() : sv_->parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

bool Model::wants_dropout_mask() const {
  return cfg_.pooling == PoolingMethod::kCorrelation && cfg_.dropout > 0.0;
}

std::size_t Model::mask_dim() const {
  return sv_ ? sv_->tdnn_spec.back().channels : cfg_.proj_dim;
}

DropoutMask Model::draw_mask(SeededRng& rng) const {
  return draw_channel_dropout(mask_dim(), cfg_.dropout, rng);
}

NodeId Model::loss_node(Graph& g, const Tensor& stack, std::size_t label,
                        const DropoutMask* mask) {
  if (label >= cfg_.num_classes) {
    throw ValueError("Model: label " + std::to_string(label) + " out of range for " +
                     std::to_string(cfg_.num_classes) + " classes");
  }
  NodeId s = g.constant(stack);
  if (sid_) {
    return g.cross_entropy(sid_logits_node(g, s, lw_, *sid_, mask), label);
  }
  NodeId emb = sv_embedding_node(g, s, lw_, *sv_, mask);
  return am_softmax_loss_node(g, emb, sv_->am_weights, label, sv_->am_scale, sv_->am_margin);
}

Tensor Model::logits(const LayerStack& stack) {
  Graph g;
  return g.value(sid_logits_node(g, g.constant(stack.layers), lw_, sid_head(), nullptr));
}

Tensor Model::embedding(const LayerStack& stack) {
  Graph g;
  return g.value(sv_embedding_node(g, g.constant(stack.layers), lw_, sv_head(), nullptr));
}

double model_grad_check(Model& model, const Tensor& stack, std::size_t label,
                        const DropoutMask* mask, double eps) {
  LossFn f = [&](bool with_grad) {
    Graph g;
    NodeId loss = model.loss_node(g, stack, label, mask);
    if (with_grad) g.backward(loss);
    return g.scalar_value(loss);
  };
  return grad_check(f, model.parameters(), eps);
}

}  // namespace corrpool
