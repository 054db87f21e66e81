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

#include "core/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace gtfc {

namespace {

std::atomic<std::uint64_t> g_next_seq{1};

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<Real> value,
                                       bool requires_grad) {
  if (shape_numel(shape) != value.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "shape " + shape_string(shape) + " does not hold " +
                    std::to_string(value.size()) + " values");
  }
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

void detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
}

Tensor::Tensor() : node_(new_node({}, {0.0}, false)) {}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::ones(const Shape& shape, bool requires_grad) {
  return full(shape, 1.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, Real v, bool requires_grad) {
  return Tensor(new_node(shape, std::vector<Real>(shape_numel(shape), v),
                         requires_grad));
}

Tensor Tensor::scalar(Real v) { return Tensor(new_node({}, {v}, false)); }

Tensor Tensor::from(const Shape& shape, std::vector<Real> values,
                    bool requires_grad) {
  return Tensor(new_node(shape, std::move(values), requires_grad));
}

Tensor Tensor::randn(const Shape& shape, std::mt19937_64& rng, Real stddev,
                     bool requires_grad) {
  std::normal_distribution<Real> dist(0.0, stddev);
  std::vector<Real> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return from(shape, std::move(v), requires_grad);
}

Tensor Tensor::uniform(const Shape& shape, std::mt19937_64& rng, Real lo,
                       Real hi, bool requires_grad) {
  std::uniform_real_distribution<Real> dist(lo, hi);
  std::vector<Real> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return from(shape, std::move(v), requires_grad);
}

std::span<Real> Tensor::mutable_data() {
  if (!is_leaf()) {
    throw Error(ErrorCode::kInvalidArgument,
                "in-place edit of a recorded (non-leaf) tensor");
  }
  return node_->value;
}

Real Tensor::item() const {
  if (numel() != 1) {
    throw Error(ErrorCode::kNotScalar,
                "item() on tensor of shape " + shape_string(shape()));
  }
  return node_->value[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (!is_leaf()) {
    throw Error(ErrorCode::kInvalidArgument,
                "requires_grad can only be toggled on leaves");
  }
  node_->requires_grad = on;
  return *this;
}

std::vector<Real> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<Real>(numel(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const {
  return Tensor(new_node(shape(), node_->value, false));
}

Tensor Tensor::clone(bool requires_grad) const {
  return Tensor(new_node(shape(), node_->value, requires_grad));
}

Tensor make_op_result(Shape shape, std::vector<Real> value,
                      const std::vector<Tensor>& inputs,
                      detail::BackwardFn backward) {
  auto node = new_node(std::move(shape), std::move(value), false);
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (any) {
    for (const auto& t : inputs) {
      if (t.node()->consumed) {
        throw Error(ErrorCode::kTapeAlreadyConsumed,
                    "operand belongs to a tape that was already consumed");
      }
    }
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
    node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  }
  return Tensor(std::move(node));
}

Tensor make_op_result(Shape shape, std::vector<Real> value,
                      std::initializer_list<Tensor> inputs,
                      detail::BackwardFn backward) {
  return make_op_result(std::move(shape), std::move(value),
                        std::vector<Tensor>(inputs), std::move(backward));
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw Error(ErrorCode::kNotScalar,
                "backward needs a scalar loss, got " + shape_string(loss.shape()));
  }
  auto root = loss.node();
  if (root->consumed) {
    throw Error(ErrorCode::kTapeAlreadyConsumed,
                "backward already ran through this graph");
  }
  if (!root->requires_grad) return;

  // Collect the recorded (non-leaf) nodes reachable from the loss.
  std::vector<std::shared_ptr<detail::Node>> recorded;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::shared_ptr<detail::Node>> stack{root};
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(n.get()).second) continue;
    if (n->consumed) {
      throw Error(ErrorCode::kTapeAlreadyConsumed,
                  "graph contains an already consumed tape segment");
    }
    if (!n->backward) continue;
    for (auto& in : n->inputs) {
      if (in->requires_grad) stack.push_back(in);
    }
    recorded.push_back(std::move(n));
  }
  // Reverse recording order is a valid topological order.
  std::sort(recorded.begin(), recorded.end(),
            [](const auto& a, const auto& b) { return a->seq > b->seq; });

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto& n : recorded) {
    if (!n->grad.empty()) n->backward(*n);
  }
  // `recorded` keeps every node alive while the links are cut.
  for (auto& n : recorded) {
    n->consumed = true;
    n->backward = nullptr;
    n->inputs.clear();
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

}  // namespace gtfc
