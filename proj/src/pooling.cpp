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

#include "corrpool/pooling.hpp"

#include "corrpool/error.hpp"
#include "corrpool/graph.hpp"

namespace corrpool {

std::size_t pooled_dim(PoolingMethod method, std::size_t d) {
  switch (method) {
    case PoolingMethod::kMean:
      return d;
    case PoolingMethod::kStatistics:
      return 2 * d;
    case PoolingMethod::kCorrelation:
      return d * (d - 1) / 2;
  }
  throw ValueError("pooled_dim: unknown pooling method");
}

PoolingMethod parse_pooling(const std::string& name) {
  if (name == "mean") return PoolingMethod::kMean;
  if (name == "meanstd") return PoolingMethod::kStatistics;
  if (name == "corr") return PoolingMethod::kCorrelation;
  throw ValueError("unknown pooling method '" + name + "' (expected mean|meanstd|corr)");
}

std::string pooling_name(PoolingMethod method) {
  switch (method) {
    case PoolingMethod::kMean:
      return "mean";
    case PoolingMethod::kStatistics:
      return "meanstd";
    case PoolingMethod::kCorrelation:
      return "corr";
  }
  throw ValueError("pooling_name: unknown pooling method");
}

std::size_t DropoutMask::kept_count() const {
  std::size_t n = 0;
  for (std::uint8_t k : kept) n += k;
  return n;
}

Tensor DropoutMask::scales() const {
  Tensor s({kept.size()});
  for (std::size_t i = 0; i < kept.size(); ++i) s[i] = kept[i] ? 1.0 : 0.0;
  return s;
}

namespace {

void require_frames(const char* op, const Tensor& frames, std::size_t min_t) {
  if (frames.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected T x D frames, got shape " +
                     frames.shape_string());
  }
  if (frames.dim(0) < min_t) {
    throw ValueError(std::string(op) + ": needs at least " + std::to_string(min_t) +
                     " frames, got " + std::to_string(frames.dim(0)));
  }
}

PooledVector wrap(const Tensor& out, PoolingMethod method, const Tensor& frames) {
  PooledVector p;
  p.data = out.raw();
  p.method = method;
  p.source_dim = frames.dim(1);
  p.source_frames = frames.dim(0);
  return p;
}

}  // namespace

PooledVector mean_pool(const Tensor& frames) {
  require_frames("mean_pool", frames, 1);
  Graph g;
  NodeId out = g.mean_pool(g.constant(frames));
  return wrap(g.value(out), PoolingMethod::kMean, frames);
}

PooledVector statistics_pool(const Tensor& frames) {
  require_frames("statistics_pool", frames, 1);
  Graph g;
  NodeId out = g.statistics_pool(g.constant(frames), kDefaultEpsilon);
  return wrap(g.value(out), PoolingMethod::kStatistics, frames);
}

Tensor standardize(const Tensor& frames, double epsilon) {
  require_frames("standardize", frames, 2);
  Graph g;
  NodeId out = g.standardize(g.constant(frames), epsilon);
  return g.value(out);
}

PooledVector correlation_pool(const Tensor& frames, const DropoutMask* mask, double epsilon) {
  require_frames("correlation_pool", frames, 2);
  if (mask != nullptr && mask->kept.size() != frames.dim(1)) {
    throw ShapeError("correlation_pool: mask length " + std::to_string(mask->kept.size()) +
                     " does not match channel count " + std::to_string(frames.dim(1)));
  }
  Graph g;
  NodeId x = g.constant(frames);
  if (mask != nullptr) {
    x = g.channel_scale(x, g.constant(mask->scales()));
  }
  NodeId out = g.correlation_uppertri(g.standardize(x, epsilon));
  return wrap(g.value(out), PoolingMethod::kCorrelation, frames);
}

NodeId pooling_node(Graph& g, NodeId frames, PoolingMethod method, double epsilon,
                    const DropoutMask* mask, bool mask_after_standardize) {
  switch (method) {
    case PoolingMethod::kMean:
      return g.mean_pool(frames);
    case PoolingMethod::kStatistics:
      return g.statistics_pool(frames, epsilon);
    case PoolingMethod::kCorrelation: {
      NodeId x = frames;
      if (mask != nullptr && !mask_after_standardize) {
        x = g.channel_scale(x, g.constant(mask->scales()));
      }
      NodeId o = g.standardize(x, epsilon);
      if (mask != nullptr && mask_after_standardize) {
        o = g.channel_scale(o, g.constant(mask->scales()));
      }
      return g.correlation_uppertri(o);
    }
  }
  throw ValueError("pooling_node: unknown pooling method");
}

DropoutMask draw_channel_dropout(std::size_t d, double probability, SeededRng& rng) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ValueError("draw_channel_dropout: probability " + std::to_string(probability) +
                     " outside [0, 1]");
  }
  DropoutMask m;
  m.probability = probability;
  m.seed = rng.state();
  m.kept.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    m.kept[i] = rng.uniform() >= probability ? 1 : 0;
  }
  return m;
}

}  // namespace corrpool
