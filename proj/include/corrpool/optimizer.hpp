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

#ifndef CORRPOOL_OPTIMIZER_HPP_
#define CORRPOOL_OPTIMIZER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "corrpool/tensor.hpp"

namespace corrpool {

enum class OptimizerKind { kAdam, kSgd };

OptimizerKind parse_optimizer(const std::string& name);
std::string optimizer_name(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First-order update applied to the accumulated gradients of every
/// trainable parameter.  Frozen parameters are skipped entirely, so their
/// values and moment slots stay bitwise unchanged.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::vector<Parameter*> params);

  void step();

  const OptimizerConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return t_; }
  const std::vector<Tensor>& moment1() const { return m_; }
  const std::vector<Tensor>& moment2() const { return v_; }

  /// Restores moment state from a checkpoint; shapes must match.
  void restore(std::uint64_t steps, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  OptimizerConfig cfg_;
  std::vector<Parameter*> params_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace corrpool

#endif  // CORRPOOL_OPTIMIZER_HPP_
