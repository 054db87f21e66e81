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

#include <vector>

#include "core/tensor.hpp"

namespace gtfc::backbone {

// Cross-correlation with square kernels and zero padding.
// x: (N, C_in, H, W) or (C_in, H, W); w: (C_out, C_in, k, k).
// Output extents are floor((ext + 2*pad - k) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad);

inline constexpr Real kBatchNormEps = 1e-5;

// Per-channel batch normalisation of (N, C, H, W). Running statistics are
// plain tensors updated in place in train mode:
//   running = momentum * running + (1 - momentum) * batch   (biased variance)
struct BatchNormState {
  Tensor gamma;         // (C), trainable
  Tensor beta;          // (C), trainable
  Tensor running_mean;  // (C)
  Tensor running_var;   // (C)
  Real momentum = 0.9;

  static BatchNormState init(std::size_t channels);
};

enum class Mode { kTrain, kEval };

// Throws kBatchTooSmall in train mode when a channel sees only one value.
Tensor batchnorm(const Tensor& x, BatchNormState& state, Mode mode);

// Mean over the last (time) axis, flattened: (N, C, F, T) -> (N, C*F), or
// (C, F, T) -> (C*F).
Tensor temporal_pool(const Tensor& x);

// x (N, in) times w (in, out) plus b (out).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Mean softmax cross-entropy of (N, K) logits against class indices.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

}  // namespace gtfc::backbone
