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

#include "corrpool/optimizer.hpp"

#include <cmath>

#include "corrpool/error.hpp"

namespace corrpool {

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw ValueError("unknown optimizer '" + name + "' (expected adam|sgd)");
}

std::string optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::kAdam ? "adam" : "sgd";
}

Optimizer::Optimizer(OptimizerConfig cfg, std::vector<Parameter*> params)
    : cfg_(cfg), params_(std::move(params)) {
  if (cfg_.learning_rate < 0.0) throw ValueError("Optimizer: negative learning rate");
  if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0)) {
    throw ValueError("Optimizer: betas must lie in [0, 1)");
  }
  if (cfg_.eps <= 0.0) throw ValueError("Optimizer: eps must be positive");
  if (cfg_.kind == OptimizerKind::kAdam) {
    for (Parameter* p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
}

void Optimizer::step() {
  ++t_;
  if (cfg_.kind == OptimizerKind::kSgd) {
    for (Parameter* p : params_) {
      if (!p->trainable) continue;
      p->value.add_scaled(p->grad, -cfg_.learning_rate);
      check_finite("sgd_step", p->value);
    }
    return;
  }
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter* p = params_[i];
    if (!p->trainable) continue;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      double g = p->grad[k];
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      p->value[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    check_finite("adam_step", p->value);
  }
}

void Optimizer::restore(std::uint64_t steps, std::vector<Tensor> m, std::vector<Tensor> v) {
  if (cfg_.kind == OptimizerKind::kSgd) {
    if (!m.empty() || !v.empty()) {
      throw ValueError("Optimizer: sgd checkpoints carry no moment state");
    }
    t_ = steps;
    return;
  }
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw ValueError("Optimizer: checkpoint has " + std::to_string(m.size()) +
                     " moment slots for " + std::to_string(params_.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!m[i].same_shape(params_[i]->value) || !v[i].same_shape(params_[i]->value)) {
      throw ValueError("Optimizer: moment shape mismatch at parameter '" + params_[i]->name +
                       "'");
    }
  }
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace corrpool
