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

#include "corrpool/gradcheck.hpp"

#include <cmath>
#include <string>

#include "corrpool/error.hpp"

namespace corrpool {

double grad_check(const LossFn& f, const std::vector<Parameter*>& params, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ValueError("grad_check: epsilon " + std::to_string(eps) +
                     " outside [1e-7, 1e-3]");
  }
  for (Parameter* p : params) {
    p->zero_grad();
  }
  double loss = f(true);
  if (!std::isfinite(loss)) {
    throw NumericError("grad_check: loss is not finite");
  }
  double worst = 0.0;
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double saved = p->value[i];
      p->value[i] = saved + eps;
      double up = f(false);
      p->value[i] = saved - eps;
      double down = f(false);
      p->value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: perturbed loss is not finite at " + p->name +
                           "[" + std::to_string(i) + "]");
      }
      double numeric = (up - down) / (2.0 * eps);
      double analytic = p->grad[i];
      double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
      worst = std::max(worst, std::fabs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace corrpool
