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

#include "core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace gtfc {

namespace {

Real checked_value(const Tensor& y) {
  if (y.numel() != 1) {
    throw Error(ErrorCode::kNotScalar, "gradcheck function must return a scalar");
  }
  const Real v = y.item();
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNonFiniteOutput, "gradcheck function returned " +
                                                 std::to_string(v));
  }
  return v;
}

Real eval_scalar(const std::function<Tensor()>& f) { return checked_value(f()); }

}  // namespace

GradcheckReport gradcheck(const std::function<Tensor()>& f,
                          const std::vector<GradcheckLeaf>& leaves, Real step,
                          Real tol) {
  if (!(step > 0)) throw Error(ErrorCode::kInvalidArgument, "step must be positive");
  for (const auto& l : leaves) {
    if (!l.tensor.is_leaf() || !l.tensor.requires_grad()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "gradcheck leaf '" + l.label + "' is not a requires_grad leaf");
    }
    Tensor(l.tensor).zero_grad();
  }

  {
    const Tensor y = f();
    checked_value(y);
    backward(y);
  }

  GradcheckReport report;
  for (const auto& l : leaves) {
    Tensor leaf = l.tensor;
    const std::vector<Real> analytic = leaf.grad();
    auto values = leaf.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Real saved = values[i];
      values[i] = saved + step;
      const Real up = eval_scalar(f);
      values[i] = saved - step;
      const Real down = eval_scalar(f);
      values[i] = saved;
      const Real numeric = (up - down) / (2.0 * step);
      const Real denom =
          std::max({std::fabs(analytic[i]), std::fabs(numeric), kGradcheckFloor});
      const Real err = std::fabs(analytic[i] - numeric) / denom;
      report.rel_errors.push_back(err);
      if (report.worst.empty() || err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = l.label + "[" + std::to_string(i) + "]";
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

GradcheckReport gradcheck(const std::function<Tensor(const Tensor&)>& f,
                          const Tensor& x, Real step, Real tol) {
  Tensor leaf = x.clone(true);
  return gradcheck([&] { return f(leaf); }, {{"x", leaf}}, step, tol);
}

}  // namespace gtfc
