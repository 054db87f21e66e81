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

#include "backbone/layers.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>

#include "core/parallel.hpp"

namespace gtfc::backbone {

using detail::Node;

namespace {

struct ConvGeom {
  std::size_t n, cin, h, w, cout, k, stride, pad, ho, wo;
  std::size_t patch() const { return cin * k * k; }
  std::size_t positions() const { return ho * wo; }
};

// cols is (C_in*k*k, Ho*Wo).
void im2col(const ConvGeom& g, const Real* x, Real* cols) {
  const std::size_t p = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        Real* row = cols + ((c * g.k + ky) * g.k + kx) * p;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = long(oy * g.stride + ky) - long(g.pad);
          Real* out = row + oy * g.wo;
          if (iy < 0 || iy >= long(g.h)) {
            std::fill_n(out, g.wo, 0.0);
            continue;
          }
          const Real* src = x + (c * g.h + std::size_t(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = long(ox * g.stride + kx) - long(g.pad);
            out[ox] = (ix < 0 || ix >= long(g.w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeom& g, const Real* cols, Real* dx) {
  const std::size_t p = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const Real* row = cols + ((c * g.k + ky) * g.k + kx) * p;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = long(oy * g.stride + ky) - long(g.pad);
          if (iy < 0 || iy >= long(g.h)) continue;
          Real* dst = dx + (c * g.h + std::size_t(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = long(ox * g.stride + kx) - long(g.pad);
            if (ix >= 0 && ix < long(g.w)) dst[ix] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const Real* a,
          std::size_t lda, const Real* b, std::size_t ldb, Real beta, Real* c) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
              int(m), int(n), int(k), 1.0, a, int(lda), b, int(ldb), beta, c, int(n));
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
  const bool batched = x.rank() == 4;
  if ((x.rank() != 3 && !batched) || w.rank() != 4 || w.dim(2) != w.dim(3)) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d input " + shape_string(x.shape()) +
                                               " with kernel " + shape_string(w.shape()));
  }
  if (stride == 0) throw Error(ErrorCode::kInvalidArgument, "conv2d stride must be positive");
  ConvGeom g{};
  g.n = batched ? x.dim(0) : 1;
  g.cin = x.dim(batched ? 1 : 0);
  g.h = x.dim(batched ? 2 : 1);
  g.w = x.dim(batched ? 3 : 2);
  g.cout = w.dim(0);
  g.k = w.dim(2);
  g.stride = stride;
  g.pad = pad;
  if (w.dim(1) != g.cin) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d kernel expects " + std::to_string(w.dim(1)) +
                                               " input channels, got " + std::to_string(g.cin));
  }
  if (g.h + 2 * pad < g.k || g.w + 2 * pad < g.k) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d input smaller than the kernel");
  }
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;

  const std::size_t in_size = g.cin * g.h * g.w, out_size = g.cout * g.positions();
  std::vector<Real> out(g.n * out_size);
  const Real* xv = x.data().data();
  const Real* wv = w.data().data();
  parallel_for(g.n, [&](std::size_t s) {
    std::vector<Real> cols(g.patch() * g.positions());
    im2col(g, xv + s * in_size, cols.data());
    gemm(false, false, g.cout, g.positions(), g.patch(), wv, g.patch(), cols.data(),
         g.positions(), 0.0, out.data() + s * out_size);
  });

  Shape shape = batched ? Shape{g.n, g.cout, g.ho, g.wo} : Shape{g.cout, g.ho, g.wo};
  return make_op_result(std::move(shape), std::move(out), {x, w}, [g](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nw = *self.inputs[1];
    const std::size_t in_size = g.cin * g.h * g.w, out_size = g.cout * g.positions();
    const std::size_t wsize = g.cout * g.patch();
    // Per-sample weight gradients are summed in sample order afterwards, so
    // the result does not depend on thread scheduling.
    std::vector<Real> dw(nw.requires_grad ? g.n * wsize : 0, 0.0);
    if (nx.requires_grad) nx.ensure_grad();
    parallel_for(g.n, [&](std::size_t s) {
      const Real* dy = self.grad.data() + s * out_size;
      std::vector<Real> cols(g.patch() * g.positions());
      if (nw.requires_grad) {
        im2col(g, nx.value.data() + s * in_size, cols.data());
        gemm(false, true, g.cout, g.patch(), g.positions(), dy, g.positions(), cols.data(),
             g.positions(), 0.0, dw.data() + s * wsize);
      }
      if (nx.requires_grad) {
        gemm(true, false, g.patch(), g.positions(), g.cout, nw.value.data(), g.patch(), dy,
             g.positions(), 0.0, cols.data());
        col2im_add(g, cols.data(), nx.grad.data() + s * in_size);
      }
    });
    if (nw.requires_grad) {
      nw.ensure_grad();
      for (std::size_t s = 0; s < g.n; ++s) {
        for (std::size_t i = 0; i < wsize; ++i) nw.grad[i] += dw[s * wsize + i];
      }
    }
  });
}

BatchNormState BatchNormState::init(std::size_t channels) {
  BatchNormState s;
  s.gamma = Tensor::ones({channels}, true);
  s.beta = Tensor::zeros({channels}, true);
  s.running_mean = Tensor::zeros({channels});
  s.running_var = Tensor::ones({channels});
  return s;
}

Tensor batchnorm(const Tensor& x, BatchNormState& state, Mode mode) {
  if (x.rank() != 4 || state.gamma.rank() != 1 || x.dim(1) != state.gamma.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch, "batchnorm input " + shape_string(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const std::size_t count = n * hw;
  std::vector<Real> mu(c), inv_std(c);
  auto xv = x.data();
  if (mode == Mode::kTrain) {
    if (count < 2) {
      throw Error(ErrorCode::kBatchTooSmall,
                  "train-mode batchnorm needs more than one value per channel");
    }
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      Real s = 0;
      for (std::size_t b = 0; b < n; ++b) {
        const Real* p = xv.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const Real m = s / Real(count);
      Real v = 0;
      for (std::size_t b = 0; b < n; ++b) {
        const Real* p = xv.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) v += (p[i] - m) * (p[i] - m);
      }
      v /= Real(count);
      mu[ch] = m;
      inv_std[ch] = 1.0 / std::sqrt(v + kBatchNormEps);
      rm[ch] = state.momentum * rm[ch] + (1.0 - state.momentum) * m;
      rv[ch] = state.momentum * rv[ch] + (1.0 - state.momentum) * v;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mu[ch] = state.running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(state.running_var[ch] + kBatchNormEps);
    }
  }
  std::vector<Real> xhat(x.numel()), out(x.numel());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * hw;
      const Real gm = state.gamma[ch], bt = state.beta[ch];
      for (std::size_t i = 0; i < hw; ++i) {
        xhat[off + i] = (xv[off + i] - mu[ch]) * inv_std[ch];
        out[off + i] = gm * xhat[off + i] + bt;
      }
    }
  }
  const bool train = mode == Mode::kTrain;
  return make_op_result(
      x.shape(), std::move(out), {x, state.gamma, state.beta},
      [n, c, hw, train, inv_std = std::move(inv_std), xhat = std::move(xhat)](Node& self) {
        Node& nx = *self.inputs[0];
        Node& ng = *self.inputs[1];
        Node& nb = *self.inputs[2];
        const Real* dy = self.grad.data();
        std::vector<Real> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              sum_dy[ch] += dy[off + i];
              sum_dy_xhat[ch] += dy[off + i] * xhat[off + i];
            }
          }
        }
        if (ng.requires_grad) {
          ng.ensure_grad();
          for (std::size_t ch = 0; ch < c; ++ch) ng.grad[ch] += sum_dy_xhat[ch];
        }
        if (nb.requires_grad) {
          nb.ensure_grad();
          for (std::size_t ch = 0; ch < c; ++ch) nb.grad[ch] += sum_dy[ch];
        }
        if (!nx.requires_grad) return;
        nx.ensure_grad();
        const Real count = Real(n * hw);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * hw;
            const Real scale = ng.value[ch] * inv_std[ch];
            const Real mdy = sum_dy[ch] / count, mdyx = sum_dy_xhat[ch] / count;
            for (std::size_t i = 0; i < hw; ++i) {
              const Real g = train ? dy[off + i] - mdy - xhat[off + i] * mdyx : dy[off + i];
              nx.grad[off + i] += scale * g;
            }
          }
        }
      });
}

Tensor temporal_pool(const Tensor& x) {
  if (x.rank() == 3) return reshape(mean(x, {2}), {x.dim(0) * x.dim(1)});
  if (x.rank() == 4) return reshape(mean(x, {3}), {x.dim(0), x.dim(1) * x.dim(2)});
  throw Error(ErrorCode::kShapeMismatch, "temporal_pool expects (N,C,F,T) or (C,F,T)");
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return matmul(x, w) + b;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || labels.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "cross_entropy logits " +
                                               shape_string(logits.shape()) + " vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  auto lv = logits.data();
  std::vector<Real> prob(n * k);
  Real loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= k) throw Error(ErrorCode::kInvalidArgument, "label out of range");
    const Real* row = lv.data() + i * k;
    const Real mx = *std::max_element(row, row + k);
    Real z = 0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < k; ++j) prob[i * k + j] = std::exp(row[j] - mx) / z;
    loss += std::log(z) + mx - row[labels[i]];
  }
  loss /= Real(n);
  return make_op_result({}, {loss}, {logits}, [n, k, labels, prob = std::move(prob)](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    const Real g = self.grad[0] / Real(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        in.grad[i * k + j] += g * (prob[i * k + j] - (j == labels[i] ? 1.0 : 0.0));
      }
    }
  });
}

}  // namespace gtfc::backbone
