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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace gtfc {

using Real = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor;

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node& self)>;

// One recorded value. Non-leaf nodes keep their operands and a backward rule
// until the tape that produced them is consumed.
struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
  std::uint64_t seq = 0;
  bool consumed = false;

  void ensure_grad();  // zero-filled on first use
};

}  // namespace detail

// Dense row-major tensor. Values are immutable once an op has produced them;
// only leaves may be edited in place (parameter updates, finite differences).
class Tensor {
 public:
  Tensor();  // scalar zero, no grad

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor ones(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, Real v, bool requires_grad = false);
  static Tensor scalar(Real v);
  static Tensor from(const Shape& shape, std::vector<Real> values,
                     bool requires_grad = false);
  static Tensor randn(const Shape& shape, std::mt19937_64& rng,
                      Real stddev = 1.0, bool requires_grad = false);
  static Tensor uniform(const Shape& shape, std::mt19937_64& rng, Real lo,
                        Real hi, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const Real> data() const { return node_->value; }
  // Leaf-only mutable access; throws for values produced by recorded ops.
  std::span<Real> mutable_data();
  Real item() const;
  Real operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const { return !node_->backward && !node_->consumed; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-filled view when no gradient has reached this tensor yet.
  std::vector<Real> grad() const;
  void zero_grad();

  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Internal plumbing for op implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Builds the result of an op. The backward rule is recorded only when some
// operand participates in differentiation.
Tensor make_op_result(Shape shape, std::vector<Real> value,
                      std::initializer_list<Tensor> inputs,
                      detail::BackwardFn backward);
Tensor make_op_result(Shape shape, std::vector<Real> value,
                      const std::vector<Tensor>& inputs,
                      detail::BackwardFn backward);

// Reverse-mode sweep from a scalar. Gradients accumulate into every
// requires_grad leaf; the tape below `loss` is released afterwards.
void backward(const Tensor& loss);

// ---- elementwise -------------------------------------------------------

enum class OpKind {
  kAdd, kSub, kMul, kDiv, kAbs, kPow, kTanh, kSigmoid, kExp, kLog, kSwish,
  kRelu, kElu, kNeg, kSqrt,
};

// Dispatching entry point. Binary kinds take `b`; kPow takes `b` as a scalar
// exponent tensor (non-differentiable in the exponent).
Tensor elementwise(OpKind kind, const Tensor& a, const Tensor* b = nullptr);

Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
// Non-integer exponents require a non-negative base. At base 0 with
// exponent < 1 the derivative is taken as 0.
Tensor pow(const Tensor& a, Real exponent);
Tensor sqrt(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor swish(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor elu(const Tensor& a);  // alpha = 1

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, Real s) { return add(a, Tensor::scalar(s)); }
inline Tensor operator+(Real s, const Tensor& a) { return add(Tensor::scalar(s), a); }
inline Tensor operator-(const Tensor& a, Real s) { return sub(a, Tensor::scalar(s)); }
inline Tensor operator*(const Tensor& a, Real s) { return mul(a, Tensor::scalar(s)); }
inline Tensor operator*(Real s, const Tensor& a) { return mul(Tensor::scalar(s), a); }
inline Tensor operator/(const Tensor& a, Real s) { return div(a, Tensor::scalar(s)); }

// ---- linear algebra ----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // (M,K) x (K,N)
Tensor transpose(const Tensor& a);                // rank-2 only

// ---- reductions --------------------------------------------------------

enum class ReduceKind { kSum, kMean, kMax, kL2Norm };

// Empty `axes` reduces over every axis. Negative axes count from the back.
Tensor reduce(ReduceKind kind, const Tensor& a, std::vector<int> axes = {},
              bool keepdims = false);
Tensor sum(const Tensor& a, std::vector<int> axes = {}, bool keepdims = false);
Tensor mean(const Tensor& a, std::vector<int> axes = {}, bool keepdims = false);

Tensor softmax(const Tensor& a, int axis);

// ---- shape ops ---------------------------------------------------------

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor narrow(const Tensor& a, int axis, std::size_t start, std::size_t length);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor stack(const std::vector<Tensor>& parts);  // new leading axis
Tensor select(const Tensor& a, std::size_t index);  // drops leading axis

}  // namespace gtfc
