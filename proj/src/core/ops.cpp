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

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "core/tensor.hpp"

namespace gtfc {

namespace {

using detail::Node;

// Offsets into an operand for every output element under broadcasting.
std::vector<std::size_t> broadcast_offsets(const Shape& in, const Shape& out) {
  const std::size_t rank = out.size();
  const std::size_t lead = rank - in.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t d = in.size(); d-- > 0;) {
    stride[lead + d] = in[d] == 1 ? 0 : s;
    s *= in[d];
  }
  std::vector<std::size_t> offsets(shape_numel(out));
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    offsets[i] = off;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      off += stride[d];
      if (idx[d] < out[d]) break;
      off -= stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  return offsets;
}

struct BinaryRule {
  Real (*f)(Real, Real);
  Real (*da)(Real, Real);
  Real (*db)(Real, Real);
};

Tensor binary_op(const BinaryRule& rule, const Tensor& a, const Tensor& b) {
  Shape out = broadcast_shape(a.shape(), b.shape());
  const std::size_t n = shape_numel(out);
  std::vector<Real> v(n);
  auto av = a.data();
  auto bv = b.data();

  const bool same = a.shape() == b.shape();
  std::shared_ptr<std::vector<std::size_t>> ia, ib;
  if (same) {
    for (std::size_t i = 0; i < n; ++i) v[i] = rule.f(av[i], bv[i]);
  } else {
    ia = std::make_shared<std::vector<std::size_t>>(broadcast_offsets(a.shape(), out));
    ib = std::make_shared<std::vector<std::size_t>>(broadcast_offsets(b.shape(), out));
    for (std::size_t i = 0; i < n; ++i) v[i] = rule.f(av[(*ia)[i]], bv[(*ib)[i]]);
  }
  return make_op_result(std::move(out), std::move(v), {a, b},
                        [rule, ia, ib, same](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto& g = self.grad;
    const auto& x = na.value;
    const auto& y = nb.value;
    if (na.requires_grad) {
      na.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t p = same ? i : (*ia)[i];
        const std::size_t q = same ? i : (*ib)[i];
        na.grad[p] += g[i] * rule.da(x[p], y[q]);
      }
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t p = same ? i : (*ia)[i];
        const std::size_t q = same ? i : (*ib)[i];
        nb.grad[q] += g[i] * rule.db(x[p], y[q]);
      }
    }
  });
}

// `df` receives the input and the forward output.
template <class F, class DF>
Tensor unary_op(const Tensor& a, F f, DF df) {
  auto av = a.data();
  std::vector<Real> v(av.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(av[i]);
  return make_op_result(a.shape(), std::move(v), {a}, [df](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      in.grad[i] += self.grad[i] * df(in.value[i], self.value[i]);
    }
  });
}

Real stable_sigmoid(Real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t normalize_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  if (axis < -r || axis >= r) {
    throw Error(ErrorCode::kInvalidAxis, "axis " + std::to_string(axis) +
                                             " out of range for rank " +
                                             std::to_string(rank));
  }
  return static_cast<std::size_t>(axis < 0 ? axis + r : axis);
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t d = 0; d < axis; ++d) r.outer *= s[d];
  r.extent = s[axis];
  for (std::size_t d = axis + 1; d < s.size(); ++d) r.inner *= s[d];
  return r;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw Error(ErrorCode::kShapeMismatch, "cannot broadcast " + shape_string(a) +
                                                 " with " + shape_string(b));
    }
    out[i] = ea == 1 ? eb : ea;
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  static constexpr BinaryRule r{[](Real x, Real y) { return x + y; },
                                [](Real, Real) { return 1.0; },
                                [](Real, Real) { return 1.0; }};
  return binary_op(r, a, b);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  static constexpr BinaryRule r{[](Real x, Real y) { return x - y; },
                                [](Real, Real) { return 1.0; },
                                [](Real, Real) { return -1.0; }};
  return binary_op(r, a, b);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  static constexpr BinaryRule r{[](Real x, Real y) { return x * y; },
                                [](Real, Real y) { return y; },
                                [](Real x, Real) { return x; }};
  return binary_op(r, a, b);
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (Real y : b.data()) {
    if (y == 0.0) throw Error(ErrorCode::kDomainError, "division by zero");
  }
  static constexpr BinaryRule r{[](Real x, Real y) { return x / y; },
                                [](Real, Real y) { return 1.0 / y; },
                                [](Real x, Real y) { return -x / (y * y); }};
  return binary_op(r, a, b);
}

Tensor neg(const Tensor& a) {
  return unary_op(a, [](Real x) { return -x; }, [](Real, Real) { return -1.0; });
}

Tensor abs(const Tensor& a) {
  return unary_op(a, [](Real x) { return std::fabs(x); },
                  [](Real x, Real) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor pow(const Tensor& a, Real p) {
  if (p == 1.0) {
    return unary_op(a, [](Real x) { return x; }, [](Real, Real) { return 1.0; });
  }
  if (p == 2.0) {
    return unary_op(a, [](Real x) { return x * x; },
                    [](Real x, Real) { return 2.0 * x; });
  }
  if (p == 0.5) return sqrt(a);
  if (p != std::floor(p)) {
    for (Real x : a.data()) {
      if (x < 0) {
        throw Error(ErrorCode::kDomainError,
                    "non-integer power of a negative base");
      }
    }
  }
  return unary_op(a, [p](Real x) { return std::pow(x, p); },
                  [p](Real x, Real) {
                    if (x == 0.0 && p < 1.0) return 0.0;
                    return p * std::pow(x, p - 1.0);
                  });
}

Tensor sqrt(const Tensor& a) {
  for (Real x : a.data()) {
    if (x < 0) throw Error(ErrorCode::kDomainError, "sqrt of a negative value");
  }
  return unary_op(a, [](Real x) { return std::sqrt(x); },
                  [](Real, Real y) { return y > 0 ? 0.5 / y : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(a, [](Real x) { return std::tanh(x); },
                  [](Real, Real y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, stable_sigmoid, [](Real, Real y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary_op(a, [](Real x) { return std::exp(x); },
                  [](Real, Real y) { return y; });
}

Tensor log(const Tensor& a) {
  for (Real x : a.data()) {
    if (!(x > 0)) throw Error(ErrorCode::kDomainError, "log of a non-positive value");
  }
  return unary_op(a, [](Real x) { return std::log(x); },
                  [](Real x, Real) { return 1.0 / x; });
}

Tensor swish(const Tensor& a) {
  return unary_op(a, [](Real x) { return x * stable_sigmoid(x); },
                  [](Real x, Real) {
                    const Real s = stable_sigmoid(x);
                    return s * (1.0 + x * (1.0 - s));
                  });
}

Tensor relu(const Tensor& a) {
  return unary_op(a, [](Real x) { return x > 0 ? x : 0.0; },
                  [](Real x, Real) { return x > 0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& a) {
  return unary_op(a, [](Real x) { return x > 0 ? x : std::expm1(x); },
                  [](Real x, Real y) { return x > 0 ? 1.0 : y + 1.0; });
}

Tensor elementwise(OpKind kind, const Tensor& a, const Tensor* b) {
  auto need_b = [&]() -> const Tensor& {
    if (!b) throw Error(ErrorCode::kInvalidArgument, "binary op needs a second operand");
    return *b;
  };
  switch (kind) {
    case OpKind::kAdd: return add(a, need_b());
    case OpKind::kSub: return sub(a, need_b());
    case OpKind::kMul: return mul(a, need_b());
    case OpKind::kDiv: return div(a, need_b());
    case OpKind::kPow: return pow(a, need_b().item());
    case OpKind::kAbs: return abs(a);
    case OpKind::kTanh: return tanh(a);
    case OpKind::kSigmoid: return sigmoid(a);
    case OpKind::kExp: return exp(a);
    case OpKind::kLog: return log(a);
    case OpKind::kSwish: return swish(a);
    case OpKind::kRelu: return relu(a);
    case OpKind::kElu: return elu(a);
    case OpKind::kNeg: return neg(a);
    case OpKind::kSqrt: return sqrt(a);
  }
  throw Error(ErrorCode::kUnknownOperator, "unknown elementwise op");
}

// ---- linear algebra ----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch, "matmul " + shape_string(a.shape()) +
                                               " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<Real> v(m * n, 0.0);
  if (m && n && k) {
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, int(m), int(n), int(k),
                1.0, a.data().data(), int(k), b.data().data(), int(n), 0.0,
                v.data(), int(n));
  }
  return make_op_result({m, n}, std::move(v), {a, b}, [m, k, n](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (!(m && n && k)) return;
    if (na.requires_grad) {
      na.ensure_grad();  // dA += dC * B^T
      cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, int(m), int(k), int(n),
                  1.0, self.grad.data(), int(n), nb.value.data(), int(n), 1.0,
                  na.grad.data(), int(k));
    }
    if (nb.requires_grad) {
      nb.ensure_grad();  // dB += A^T * dC
      cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, int(k), int(n), int(m),
                  1.0, na.value.data(), int(k), self.grad.data(), int(n), 1.0,
                  nb.grad.data(), int(n));
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "transpose expects rank 2, got " +
                                               shape_string(a.shape()));
  }
  const std::size_t r = a.dim(0), c = a.dim(1);
  auto av = a.data();
  std::vector<Real> v(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[j * r + i] = av[i * c + j];
  return make_op_result({c, r}, std::move(v), {a}, [r, c](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) in.grad[i * c + j] += self.grad[j * r + i];
  });
}

// ---- reductions --------------------------------------------------------

Tensor reduce(ReduceKind kind, const Tensor& a, std::vector<int> axes, bool keepdims) {
  const std::size_t rank = a.rank();
  std::vector<bool> reduced(rank, axes.empty());
  for (int ax : axes) reduced[normalize_axis(ax, rank)] = true;

  Shape out_keep(rank);
  Shape out;
  for (std::size_t d = 0; d < rank; ++d) {
    out_keep[d] = reduced[d] ? 1 : a.dim(d);
    if (!reduced[d]) out.push_back(a.dim(d));
  }
  if (keepdims) out = out_keep;
  const std::size_t n_out = shape_numel(out_keep);
  const std::size_t count = n_out ? a.numel() / n_out : 0;

  // Output slot of every input element.
  auto slot = std::make_shared<std::vector<std::size_t>>(a.numel());
  {
    std::vector<std::size_t> ostride(rank, 0);
    std::size_t s = 1;
    for (std::size_t d = rank; d-- > 0;) {
      ostride[d] = reduced[d] ? 0 : s;
      s *= out_keep[d];
    }
    std::vector<std::size_t> idx(rank, 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < slot->size(); ++i) {
      (*slot)[i] = off;
      for (std::size_t d = rank; d-- > 0;) {
        ++idx[d];
        off += ostride[d];
        if (idx[d] < a.dim(d)) break;
        off -= ostride[d] * idx[d];
        idx[d] = 0;
      }
    }
  }

  auto av = a.data();
  std::vector<Real> v(n_out, 0.0);
  auto argmax = std::make_shared<std::vector<std::size_t>>();
  switch (kind) {
    case ReduceKind::kSum:
    case ReduceKind::kMean:
      for (std::size_t i = 0; i < av.size(); ++i) v[(*slot)[i]] += av[i];
      if (kind == ReduceKind::kMean && count) {
        for (auto& x : v) x /= Real(count);
      }
      break;
    case ReduceKind::kMax:
      argmax->assign(n_out, std::numeric_limits<std::size_t>::max());
      for (std::size_t i = 0; i < av.size(); ++i) {
        auto& am = (*argmax)[(*slot)[i]];
        if (am == std::numeric_limits<std::size_t>::max() || av[i] > av[am]) am = i;
      }
      for (std::size_t o = 0; o < n_out; ++o) v[o] = av[(*argmax)[o]];
      break;
    case ReduceKind::kL2Norm:
      for (std::size_t i = 0; i < av.size(); ++i) v[(*slot)[i]] += av[i] * av[i];
      for (auto& x : v) x = std::sqrt(x + std::numeric_limits<Real>::min());
      break;
  }

  return make_op_result(std::move(out), std::move(v), {a},
                        [kind, slot, argmax, count](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    const auto& g = self.grad;
    switch (kind) {
      case ReduceKind::kSum:
        for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += g[(*slot)[i]];
        break;
      case ReduceKind::kMean:
        for (std::size_t i = 0; i < in.grad.size(); ++i)
          in.grad[i] += g[(*slot)[i]] / Real(count);
        break;
      case ReduceKind::kMax:
        for (std::size_t o = 0; o < g.size(); ++o) in.grad[(*argmax)[o]] += g[o];
        break;
      case ReduceKind::kL2Norm:
        for (std::size_t i = 0; i < in.grad.size(); ++i) {
          const std::size_t o = (*slot)[i];
          in.grad[i] += g[o] * in.value[i] / self.value[o];
        }
        break;
    }
  });
}

Tensor sum(const Tensor& a, std::vector<int> axes, bool keepdims) {
  return reduce(ReduceKind::kSum, a, std::move(axes), keepdims);
}

Tensor mean(const Tensor& a, std::vector<int> axes, bool keepdims) {
  return reduce(ReduceKind::kMean, a, std::move(axes), keepdims);
}

Tensor softmax(const Tensor& a, int axis) {
  const std::size_t ax = normalize_axis(axis, a.rank());
  const AxisSplit sp = split_at(a.shape(), ax);
  auto av = a.data();
  std::vector<Real> v(av.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.extent * sp.inner + in;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t k = 0; k < sp.extent; ++k) mx = std::max(mx, av[base + k * sp.inner]);
      Real z = 0.0;
      for (std::size_t k = 0; k < sp.extent; ++k) {
        const Real e = std::exp(av[base + k * sp.inner] - mx);
        v[base + k * sp.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < sp.extent; ++k) v[base + k * sp.inner] /= z;
    }
  }
  return make_op_result(a.shape(), std::move(v), {a}, [sp](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.extent * sp.inner + i;
        Real dot = 0.0;
        for (std::size_t k = 0; k < sp.extent; ++k) {
          const std::size_t p = base + k * sp.inner;
          dot += g[p] * y[p];
        }
        for (std::size_t k = 0; k < sp.extent; ++k) {
          const std::size_t p = base + k * sp.inner;
          in.grad[p] += y[p] * (g[p] - dot);
        }
      }
    }
  });
}

// ---- shape ops ---------------------------------------------------------

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_numel(shape) != a.numel()) {
    throw Error(ErrorCode::kShapeMismatch, "reshape " + shape_string(a.shape()) +
                                               " -> " + shape_string(shape));
  }
  std::vector<Real> v(a.data().begin(), a.data().end());
  return make_op_result(shape, std::move(v), {a}, [](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
  });
}

Tensor narrow(const Tensor& a, int axis, std::size_t start, std::size_t length) {
  const std::size_t ax = normalize_axis(axis, a.rank());
  if (start + length > a.dim(ax)) {
    throw Error(ErrorCode::kShapeMismatch, "narrow past the end of axis " +
                                               std::to_string(ax));
  }
  const AxisSplit sp = split_at(a.shape(), ax);
  Shape out = a.shape();
  out[ax] = length;
  auto av = a.data();
  std::vector<Real> v(sp.outer * length * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(av.begin() + (o * sp.extent + start) * sp.inner, length * sp.inner,
                v.begin() + o * length * sp.inner);
  }
  return make_op_result(std::move(out), std::move(v), {a},
                        [sp, start, length](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const Real* src = self.grad.data() + o * length * sp.inner;
      Real* dst = in.grad.data() + (o * sp.extent + start) * sp.inner;
      for (std::size_t i = 0; i < length * sp.inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat of nothing");
  const std::size_t ax = normalize_axis(axis, parts[0].rank());
  Shape out = parts[0].shape();
  out[ax] = 0;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != out.size()) {
      throw Error(ErrorCode::kShapeMismatch, "concat rank mismatch");
    }
    out[ax] += probe[ax];
    probe[ax] = 0;
    Shape ref = parts[0].shape();
    ref[ax] = 0;
    if (probe != ref) throw Error(ErrorCode::kShapeMismatch, "concat extent mismatch");
  }
  const AxisSplit sp = split_at(out, ax);
  std::vector<Real> v(shape_numel(out));
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    const std::size_t len = p.dim(ax);
    auto pv = p.data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(pv.begin() + o * len * sp.inner, len * sp.inner,
                  v.begin() + (o * sp.extent + at) * sp.inner);
    }
    at += len;
  }
  return make_op_result(std::move(out), std::move(v), parts,
                        [sp, offsets, ax](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      Node& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      in.ensure_grad();
      const std::size_t len = in.shape[ax];
      for (std::size_t o = 0; o < sp.outer; ++o) {
        const Real* src = self.grad.data() + (o * sp.extent + offsets[k]) * sp.inner;
        Real* dst = in.grad.data() + o * len * sp.inner;
        for (std::size_t i = 0; i < len * sp.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor stack(const std::vector<Tensor>& parts) {
  std::vector<Tensor> lifted;
  lifted.reserve(parts.size());
  for (const auto& p : parts) {
    Shape s = p.shape();
    s.insert(s.begin(), 1);
    lifted.push_back(reshape(p, s));
  }
  return concat(lifted, 0);
}

Tensor select(const Tensor& a, std::size_t index) {
  if (a.rank() == 0) throw Error(ErrorCode::kInvalidAxis, "select on a scalar");
  Shape s(a.shape().begin() + 1, a.shape().end());
  return reshape(narrow(a, 0, index, 1), s);
}

}  // namespace gtfc
