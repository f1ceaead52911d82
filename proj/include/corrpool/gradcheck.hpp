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

#ifndef CORRPOOL_GRADCHECK_HPP_
#define CORRPOOL_GRADCHECK_HPP_

#include <functional>
#include <vector>

#include "corrpool/tensor.hpp"

namespace corrpool {

/// Scalar loss under test.  `with_grad == true` must run backward and
/// accumulate gradients into the parameters; `with_grad == false` must only
/// return the loss value.  The function is re-evaluated many times with
/// perturbed parameter values, so it has to read Parameter::value fresh on
/// every call (i.e. build a new Graph inside).
using LossFn = std::function<double(bool with_grad)>;

/// Compares analytic gradients against central finite differences.
///
/// Returns max over all entries of trainable parameters of
///   |analytic - numeric| / max(1, |analytic|, |numeric|)
/// where numeric = (f(x+eps) - f(x-eps)) / (2*eps) per entry.
///
/// eps must lie in [1e-7, 1e-3].  An empty or all-frozen parameter list
/// yields 0.  A non-finite loss raises NumericError.
double grad_check(const LossFn& f, const std::vector<Parameter*>& params, double eps);

}  // namespace corrpool

#endif  // CORRPOOL_GRADCHECK_HPP_
