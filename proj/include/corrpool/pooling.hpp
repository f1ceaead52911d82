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

#ifndef CORRPOOL_POOLING_HPP_
#define CORRPOOL_POOLING_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "corrpool/graph.hpp"
#include "corrpool/rng.hpp"
#include "corrpool/tensor.hpp"

namespace corrpool {

/// Std/variance threshold below which a channel counts as degenerate.
inline constexpr double kDefaultEpsilon = 1e-8;

enum class PoolingMethod { kMean, kStatistics, kCorrelation };

/// Output length: D (mean), 2D (statistics), D(D-1)/2 (correlation).
std::size_t pooled_dim(PoolingMethod method, std::size_t d);

/// Parses the CLI spelling: "mean", "meanstd", or "corr".
PoolingMethod parse_pooling(const std::string& name);
std::string pooling_name(PoolingMethod method);

/// Fixed-length utterance vector produced by one of the pooling methods.
struct PooledVector {
  std::vector<double> data;
  PoolingMethod method = PoolingMethod::kMean;
  std::size_t source_dim = 0;
  std::size_t source_frames = 0;
};

/// Channel-dropout decision: kept[d] == 1 keeps channel d; dropped channels
/// are zeroed with no rescaling of the survivors.
struct DropoutMask {
  std::vector<std::uint8_t> kept;
  double probability = 0.0;
  std::uint64_t seed = 0;

  std::size_t kept_count() const;
  /// 0/1 multipliers, one per channel, for applying the mask.
  Tensor scales() const;
};

/// Per-channel temporal mean.  frames is T x D, T >= 1.
PooledVector mean_pool(const Tensor& frames);

/// Per-channel temporal mean concatenated with population std
/// (1/T normalization).  frames is T x D, T >= 1.
PooledVector statistics_pool(const Tensor& frames);

/// Per-channel mean/variance normalization over time.  Channels with
/// std <= epsilon come out all-zero.  frames is T x D, T >= 2.
Tensor standardize(const Tensor& frames, double epsilon = kDefaultEpsilon);

/// Correlation pooling: optional channel zeroing, standardization, then the
/// strict upper triangle (row-major, i < j) of C = (1/T) * sum_t o_t o_t'.
/// A masked channel contributes exact zeros to every entry it touches.
/// frames is T x D, T >= 2; mask may be null.
PooledVector correlation_pool(const Tensor& frames, const DropoutMask* mask,
                              double epsilon = kDefaultEpsilon);

/// Draws i.i.d. Bernoulli(1 - probability) keep decisions per channel.
DropoutMask draw_channel_dropout(std::size_t d, double probability, SeededRng& rng);

/// Builds the selected pooling pipeline on an existing graph.  For
/// correlation pooling the mask is applied before standardization by
/// default; `mask_after_standardize` switches to the alternative ordering.
/// Mean and statistics pooling ignore the mask.
NodeId pooling_node(Graph& g, NodeId frames, PoolingMethod method, double epsilon,
                    const DropoutMask* mask = nullptr, bool mask_after_standardize = false);

}  // namespace corrpool

#endif  // CORRPOOL_POOLING_HPP_
