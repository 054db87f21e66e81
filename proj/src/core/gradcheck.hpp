// Copyright 2026 The GTFC Authors
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

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace gtfc {

// Comparison of reverse-mode gradients against central differences.
//
// The error at each coordinate is |analytic - numeric| / max(|analytic|,
// |numeric|, kGradcheckFloor). The floor keeps coordinates whose true
// gradient is zero from turning round-off into a large relative error.
inline constexpr Real kGradcheckFloor = 1e-3;

struct GradcheckReport {
  std::vector<Real> rel_errors;  // one per checked coordinate, in leaf order
  Real max_rel_error = 0.0;
  std::string worst;             // "<leaf label>[<flat index>]"
  Real worst_analytic = 0.0;
  Real worst_numeric = 0.0;
  bool passed = true;
};

struct GradcheckLeaf {
  std::string label;
  Tensor tensor;  // must be a requires_grad leaf
};

// `f` maps x to a scalar. x is copied into a fresh leaf for the check.
GradcheckReport gradcheck(const std::function<Tensor(const Tensor&)>& f,
                          const Tensor& x, Real step, Real tol);

// Checks every coordinate of every leaf; `f` rebuilds the graph on each call
// and must read the leaves' current values.
GradcheckReport gradcheck(const std::function<Tensor()>& f,
                          const std::vector<GradcheckLeaf>& leaves, Real step,
                          Real tol);

}  // namespace gtfc
