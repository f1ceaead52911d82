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

#include "corrpool/heads.hpp"

#include <cmath>

#include "corrpool/error.hpp"

namespace corrpool {

Task parse_task(const std::string& name) {
  if (name == "sid") return Task::kSid;
  if (name == "sv") return Task::kSv;
  if (name == "er") return Task::kEr;
  throw ValueError("unknown task '" + name + "' (expected sid|sv|er)");
}

std::string task_name(Task t) {
  switch (t) {
    case Task::kSid:
      return "sid";
    case Task::kSv:
      return "sv";
    case Task::kEr:
      return "er";
  }
  throw ValueError("task_name: unknown task");
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "linear") return Activation::kLinear;
  throw ValueError("unknown activation '" + name + "' (expected relu|linear)");
}

std::string activation_name(Activation a) {
  return a == Activation::kRelu ? "relu" : "linear";
}

namespace {

// Gaussian init scaled by 1/sqrt(fan_in).
Tensor init_matrix(std::size_t rows, std::size_t cols, std::size_t fan_in, SeededRng& rng) {
  Tensor w({rows, cols});
  double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w.raw()) v = s * rng.normal();
  return w;
}

void require_positive(const char* what, std::size_t v) {
  if (v == 0) throw ValueError(std::string(what) + " must be positive");
}

}  // namespace

std::vector<Parameter*> SidHead::parameters() {
  std::vector<Parameter*> out{&proj};
  if (post_proj) out.push_back(&*post_proj);
  out.push_back(&classifier);
  return out;
}

SidHead make_sid_head(const SidConfig& cfg, SeededRng& rng) {
  require_positive("SidConfig.input_dim", cfg.input_dim);
  require_positive("SidConfig.proj_dim", cfg.proj_dim);
  require_positive("SidConfig.num_classes", cfg.num_classes);
  if (cfg.pooling == PoolingMethod::kCorrelation && cfg.proj_dim < 2) {
    throw ValueError("SidConfig: correlation pooling needs proj_dim >= 2");
  }
  std::size_t pooled = pooled_dim(cfg.pooling, cfg.proj_dim);
  SidHead h{
      Parameter("proj", init_matrix(cfg.input_dim, cfg.proj_dim, cfg.input_dim, rng)),
      std::nullopt,
      Parameter("classifier", Tensor({1})),  // placed below once dims are known
      cfg.pooling,
      cfg.dropout,
      cfg.epsilon,
      cfg.dropout_after_standardize,
  };
  std::size_t class_in = pooled;
  if (cfg.post_pool_proj) {
    require_positive("SidConfig.post_pool_dim", cfg.post_pool_dim);
    h.post_proj = Parameter("post_proj", init_matrix(pooled, cfg.post_pool_dim, pooled, rng));
    class_in = cfg.post_pool_dim;
  }
  h.classifier = Parameter("classifier", init_matrix(class_in, cfg.num_classes, class_in, rng));
  return h;
}

std::size_t SvHead::receptive_field() const {
  std::size_t span = 0;
  for (const TdnnLayerSpec& l : tdnn_spec) span += (l.kernel - 1) * l.dilation;
  return span + 1;
}

std::vector<Parameter*> SvHead::parameters() {
  std::vector<Parameter*> out{&proj};
  for (Parameter& p : tdnn) out.push_back(&p);
  out.push_back(&embed);
  out.push_back(&am_weights);
  return out;
}

std::vector<TdnnLayerSpec> default_tdnn_spec(std::size_t width, std::size_t last_dim) {
  return {
      {5, 1, width, Activation::kRelu},
      {3, 2, width, Activation::kRelu},
      {3, 3, width, Activation::kRelu},
      {1, 1, width, Activation::kRelu},
      {1, 1, last_dim, Activation::kRelu},
  };
}

SvHead make_sv_head(const SvConfig& cfg, SeededRng& rng) {
  require_positive("SvConfig.input_dim", cfg.input_dim);
  require_positive("SvConfig.proj_dim", cfg.proj_dim);
  require_positive("SvConfig.embed_dim", cfg.embed_dim);
  require_positive("SvConfig.num_classes", cfg.num_classes);
  if (cfg.am_scale <= 0.0) throw ValueError("SvConfig.am_scale must be positive");
  if (cfg.am_margin < 0.0) throw ValueError("SvConfig.am_margin must be non-negative");
  std::vector<TdnnLayerSpec> spec = cfg.tdnn;
  if (spec.empty()) {
    spec = default_tdnn_spec(
        512, cfg.pooling == PoolingMethod::kCorrelation ? 512 : 1500);
  }
  for (const TdnnLayerSpec& l : spec) {
    require_positive("tdnn kernel", l.kernel);
    require_positive("tdnn dilation", l.dilation);
    require_positive("tdnn channels", l.channels);
  }
  std::size_t last = spec.back().channels;
  if (cfg.pooling == PoolingMethod::kCorrelation && last < 2) {
    throw ValueError("SvConfig: correlation pooling needs at least 2 frame channels");
  }
  SvHead h;
  h.proj = Parameter("proj", init_matrix(cfg.input_dim, cfg.proj_dim, cfg.input_dim, rng));
  h.tdnn_spec = spec;
  std::size_t cin = cfg.proj_dim;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    std::size_t fan_in = spec[i].kernel * cin;
    h.tdnn.emplace_back("tdnn." + std::to_string(i),
                        init_matrix(fan_in, spec[i].channels, fan_in, rng));
    cin = spec[i].channels;
  }
  std::size_t pooled = pooled_dim(cfg.pooling, last);
  h.embed = Parameter("embed", init_matrix(pooled, cfg.embed_dim, pooled, rng));
  h.am_weights =
      Parameter("am_weights", init_matrix(cfg.num_classes, cfg.embed_dim, cfg.embed_dim, rng));
  h.pooling = cfg.pooling;
  h.dropout = cfg.dropout;
  h.am_scale = cfg.am_scale;
  h.am_margin = cfg.am_margin;
  h.epsilon = cfg.epsilon;
  h.dropout_after_standardize = cfg.dropout_after_standardize;
  return h;
}

NodeId sid_logits_node(Graph& g, NodeId stack, LayerWeights& weights, SidHead& head,
                       const DropoutMask* mask) {
  NodeId frames = aggregate_node(g, stack, weights);
  NodeId projected = g.matmul(frames, g.leaf(head.proj));
  NodeId pooled = pooling_node(g, projected, head.pooling, head.epsilon, mask,
                               head.dropout_after_standardize);
  NodeId features = pooled;
  if (head.post_proj) {
    features = g.vecmat(pooled, g.leaf(*head.post_proj));
  }
  return g.vecmat(features, g.leaf(head.classifier));
}

NodeId tdnn_frames_node(Graph& g, NodeId frames, SvHead& head) {
  NodeId x = frames;
  for (std::size_t i = 0; i < head.tdnn.size(); ++i) {
    const TdnnLayerSpec& l = head.tdnn_spec[i];
    x = g.conv1d(x, g.leaf(head.tdnn[i]), l.kernel, l.dilation);
    if (l.activation == Activation::kRelu) x = g.relu(x);
  }
  return x;
}

NodeId sv_embedding_node(Graph& g, NodeId stack, LayerWeights& weights, SvHead& head,
                         const DropoutMask* mask) {
  NodeId frames = aggregate_node(g, stack, weights);
  NodeId projected = g.matmul(frames, g.leaf(head.proj));
  NodeId features = tdnn_frames_node(g, projected, head);
  NodeId pooled = pooling_node(g, features, head.pooling, head.epsilon, mask,
                               head.dropout_after_standardize);
  // The embedding is the pre-nonlinearity output of this layer.
  return g.vecmat(pooled, g.leaf(head.embed));
}

NodeId am_softmax_loss_node(Graph& g, NodeId embedding, Parameter& class_weights,
                            std::size_t label, double scale, double margin) {
  NodeId e = g.l2_normalize(embedding);
  NodeId w = g.l2_normalize(g.leaf(class_weights));
  NodeId cosines = g.matvec(w, e);
  return g.cross_entropy(g.margin_logits(cosines, label, scale, margin), label);
}

namespace {

const DropoutMask* maybe_mask(DropoutMask& storage, PoolingMethod pooling, double dropout,
                              bool training, std::size_t d, SeededRng& rng) {
  if (!training || pooling != PoolingMethod::kCorrelation || dropout <= 0.0) return nullptr;
  storage = draw_channel_dropout(d, dropout, rng);
  return &storage;
}

}  // namespace

Tensor sid_forward(const LayerStack& stack, SidHead& head, LayerWeights& weights,
                   bool training, SeededRng& rng) {
  Graph g;
  DropoutMask storage;
  const DropoutMask* mask =
      maybe_mask(storage, head.pooling, head.dropout, training, head.proj_dim(), rng);
  return g.value(sid_logits_node(g, g.constant(stack.layers), weights, head, mask));
}

Tensor tdnn_frame_forward(const Tensor& frames, SvHead& head) {
  Graph g;
  return g.value(tdnn_frames_node(g, g.constant(frames), head));
}

Tensor sv_forward(const LayerStack& stack, SvHead& head, LayerWeights& weights,
                  bool training, SeededRng& rng) {
  Graph g;
  DropoutMask storage;
  const DropoutMask* mask = maybe_mask(storage, head.pooling, head.dropout, training,
                                       head.tdnn_spec.back().channels, rng);
  return g.value(sv_embedding_node(g, g.constant(stack.layers), weights, head, mask));
}

double am_softmax_loss(const Tensor& embedding, Parameter& class_weights, std::size_t label,
                       double scale, double margin) {
  Graph g;
  return g.scalar_value(
      am_softmax_loss_node(g, g.constant(embedding), class_weights, label, scale, margin));
}

}  // namespace corrpool
