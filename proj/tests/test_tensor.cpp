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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "core/gradcheck.hpp"
#include "core/serialize.hpp"
#include "core/tensor.hpp"

namespace gtfc {
namespace {

Real scalar_sigmoid(Real x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(Elementwise, SwishValues) {
  EXPECT_EQ(swish(Tensor::scalar(0.0)).item(), 0.0);
  EXPECT_NEAR(swish(Tensor::scalar(1.0)).item(), 1.0 * scalar_sigmoid(1.0), 1e-15);
  EXPECT_NEAR(swish(Tensor::scalar(1.0)).item(), 0.7310585786300049, 1e-15);
}

TEST(Elementwise, AbsAndDispatch) {
  const Tensor x = Tensor::from({2}, {-3.0, 4.0});
  const Tensor y = elementwise(OpKind::kAbs, x);
  EXPECT_EQ(y[0], 3.0);
  EXPECT_EQ(y[1], 4.0);
  const Tensor two = Tensor::scalar(2.0);
  const Tensor sq = elementwise(OpKind::kPow, x, &two);
  EXPECT_EQ(sq[0], 9.0);
  EXPECT_THROW(elementwise(OpKind::kAdd, x), Error);
}

TEST(Elementwise, DomainErrors) {
  const Tensor x = Tensor::from({2}, {0.0, 1.0});
  try {
    log(x);
    FAIL() << "log(0) must throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDomainError);
  }
  EXPECT_THROW(div(Tensor::ones({2}), x), Error);
  EXPECT_THROW(pow(Tensor::from({1}, {-2.0}), 0.5), Error);
  EXPECT_NO_THROW(pow(Tensor::from({1}, {-2.0}), 3.0));
}

TEST(Elementwise, ShapeMismatch) {
  try {
    add(Tensor::ones({2, 3}), Tensor::ones({4}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

// Oracle: decode each output multi-index and pick operand elements by hand.
Real tiled_value(const Tensor& t, const Shape& out, std::size_t flat) {
  std::vector<std::size_t> idx(out.size());
  for (std::size_t d = out.size(); d-- > 0;) {
    idx[d] = flat % out[d];
    flat /= out[d];
  }
  const std::size_t lead = out.size() - t.rank();
  std::size_t off = 0;
  for (std::size_t d = 0; d < t.rank(); ++d) {
    const std::size_t i = t.dim(d) == 1 ? 0 : idx[lead + d];
    off = off * t.dim(d) + i;
  }
  return t[off];
}

std::vector<Shape> small_shapes() {
  std::vector<Shape> out{{}};
  for (std::size_t rank = 1; rank <= 4; ++rank) {
    std::size_t combos = 1;
    for (std::size_t r = 0; r < rank; ++r) combos *= 3;
    for (std::size_t c = 0; c < combos; ++c) {
      Shape s(rank);
      std::size_t k = c;
      for (auto& e : s) {
        e = 1 + k % 3;
        k /= 3;
      }
      out.push_back(s);
    }
  }
  return out;
}

TEST(Elementwise, BroadcastMatchesManualTilingExhaustively) {
  std::mt19937_64 rng(3);
  const auto shapes = small_shapes();
  ASSERT_EQ(shapes.size(), 121u);
  std::size_t compatible = 0;
  for (const auto& sa : shapes) {
    const Tensor a = Tensor::randn(sa, rng);
    for (const auto& sb : shapes) {
      const Tensor b = Tensor::randn(sb, rng);
      bool ok = true;
      const std::size_t rank = std::max(sa.size(), sb.size());
      Shape out(rank);
      for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t ea = i + sa.size() < rank ? 1 : sa[i + sa.size() - rank];
        const std::size_t eb = i + sb.size() < rank ? 1 : sb[i + sb.size() - rank];
        if (ea != eb && ea != 1 && eb != 1) ok = false;
        out[i] = std::max(ea, eb);
      }
      if (!ok) {
        EXPECT_THROW(add(a, b), Error);
        continue;
      }
      ++compatible;
      const Tensor s = add(a, b);
      const Tensor m = mul(a, b);
      ASSERT_EQ(s.shape(), out);
      for (std::size_t i = 0; i < s.numel(); ++i) {
        const Real x = tiled_value(a, out, i), y = tiled_value(b, out, i);
        ASSERT_EQ(s[i], x + y);
        ASSERT_EQ(m[i], x * y);
      }
    }
  }
  EXPECT_GT(compatible, 1000u);
}

TEST(Matmul, Examples) {
  const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  const Tensor r = matmul(eye, m);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r[i], m[i]);
  EXPECT_EQ(matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4})).item(), 11.0);
  EXPECT_THROW(matmul(Tensor::ones({2, 3}), Tensor::ones({2, 3})), Error);
}

TEST(Matmul, BackwardMatchesCentralDifferences) {
  std::mt19937_64 rng(11);
  Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
  Tensor b = Tensor::randn({4, 2}, rng, 1.0, true);
  const Tensor w = Tensor::randn({3, 2}, rng);
  auto f = [&] { return sum(matmul(a, b) * w); };
  const auto report = gradcheck(f, {{"a", a}, {"b", b}}, 1e-5, 1e-6);
  EXPECT_TRUE(report.passed) << report.max_rel_error << " at " << report.worst;
}

TEST(Reduce, Examples) {
  const Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(sum(m).item(), 10.0);
  EXPECT_EQ(mean(Tensor::from({2}, {3, 4}), {0}).item(), 3.5);
  EXPECT_EQ(reduce(ReduceKind::kL2Norm, Tensor::from({2}, {3, 4})).item(), 5.0);
  const Tensor mx = reduce(ReduceKind::kMax, m, {1});
  EXPECT_EQ(mx.shape(), (Shape{2}));
  EXPECT_EQ(mx[0], 2.0);
  EXPECT_EQ(mx[1], 4.0);
  const Tensor kept = sum(m, {0}, true);
  EXPECT_EQ(kept.shape(), (Shape{1, 2}));
  EXPECT_EQ(kept[1], 6.0);
  EXPECT_EQ(sum(m, {-1}).shape(), (Shape{2}));
  try {
    sum(m, {2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidAxis);
  }
}

TEST(Softmax, Examples) {
  const Tensor u = softmax(Tensor::zeros({3}), 0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(u[i], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(softmax(Tensor::from({1}, {-123.4}), 0).item(), 1.0);
  const Tensor big = softmax(Tensor::from({2}, {1000, 1000}), 0);
  EXPECT_EQ(big[0], 0.5);
  EXPECT_EQ(big[1], 0.5);
  EXPECT_THROW(softmax(u, 1), Error);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = Tensor::randn({4, 7}, rng, 5.0);
    const Real c = std::uniform_real_distribution<Real>(-50, 50)(rng);
    for (int axis : {0, 1}) {
      const Tensor y = softmax(x, axis);
      const Tensor ys = softmax(x + c, axis);
      const Tensor sums = sum(y, {axis});
      for (Real s : sums.data()) EXPECT_NEAR(s, 1.0, 1e-9);
      for (std::size_t i = 0; i < y.numel(); ++i) {
        EXPECT_GT(y[i], 0.0);
        EXPECT_NEAR(y[i], ys[i], 1e-9);
      }
    }
  }
}

TEST(Backward, Examples) {
  Tensor x = Tensor::from({2, 2}, {1, -2, 3, 0.5}, true);
  backward(sum(x));
  for (Real g : x.grad()) EXPECT_EQ(g, 1.0);

  Tensor y = Tensor::from({1}, {3.0}, true);
  backward(sum(y * y));
  EXPECT_EQ(y.grad()[0], 6.0);
}

TEST(Backward, Errors) {
  Tensor x = Tensor::ones({2}, true);
  try {
    backward(x * 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotScalar);
  }
  const Tensor loss = sum(x * x);
  backward(loss);
  try {
    backward(loss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTapeAlreadyConsumed);
  }
}

TEST(Backward, NoRecordedOpsLeavesGradsZero) {
  Tensor x = Tensor::ones({3}, true);
  const Tensor c = sum(Tensor::ones({3}));  // x never touched
  backward(c);
  for (Real g : x.grad()) EXPECT_EQ(g, 0.0);
  EXPECT_FALSE(x.has_grad());
}

TEST(Backward, IndependentGraphsAccumulateAdditively) {
  std::mt19937_64 rng(9);
  Tensor x = Tensor::randn({5}, rng, 1.0, true);
  backward(sum(tanh(x)));
  const auto g1 = x.grad();
  x.zero_grad();
  backward(sum(x * x));
  const auto g2 = x.grad();
  x.zero_grad();
  backward(sum(tanh(x)) + sum(x * x));
  const auto g12 = x.grad();
  x.zero_grad();
  backward(sum(tanh(x)));
  backward(sum(x * x));
  const auto g_seq = x.grad();
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(g12[i], g1[i] + g2[i], 1e-15);
    EXPECT_NEAR(g_seq[i], g1[i] + g2[i], 1e-15);
  }
}

TEST(Gradcheck, LinearFunctionIsExactOnDyadicInputs) {
  const Tensor x = Tensor::from({4}, {0.5, -1.25, 2.0, 3.75});
  const auto r = gradcheck([](const Tensor& t) { return sum(t); }, x, 1.0 / 131072.0, 1e-12);
  EXPECT_EQ(r.max_rel_error, 0.0);
  // With a decimal step the result is exact only up to round-off.
  std::mt19937_64 rng(1);
  const auto r2 = gradcheck([](const Tensor& t) { return sum(t); },
                            Tensor::randn({6}, rng), 1e-5, 1e-6);
  EXPECT_LT(r2.max_rel_error, 1e-9);
}

TEST(Gradcheck, TanhSum) {
  std::mt19937_64 rng(2);
  const Tensor x = Tensor::uniform({10}, rng, -1, 1);
  const auto r = gradcheck([](const Tensor& t) { return sum(tanh(t)); }, x, 1e-5, 1e-6);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(Gradcheck, DetectsWrongGradient) {
  // stop-gradient through detach makes the analytic gradient wrong.
  std::mt19937_64 rng(4);
  const Tensor x = Tensor::randn({3}, rng);
  const auto r = gradcheck([](const Tensor& t) { return sum(t * t.detach()); }, x, 1e-5, 1e-4);
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.max_rel_error, 0.5, 1e-6);
}

TEST(Gradcheck, NonFiniteOutputThrows) {
  try {
    gradcheck([](const Tensor& t) { return sum(t) / 0.0 * 0.0; }, Tensor::ones({1}), 1e-5, 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::kDomainError ||
                e.code() == ErrorCode::kNonFiniteOutput);
  }
  try {
    gradcheck([](const Tensor& t) { return sum(exp(t * 1000.0)); }, Tensor::ones({1}), 1e-5, 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteOutput);
  }
}

// Every differentiable primitive, ten seeds, tol 1e-6.
TEST(Gradcheck, AllPrimitivesTenSeeds) {
  using Fn = std::function<Tensor(const Tensor&)>;
  const std::vector<std::pair<const char*, Fn>> cases = {
      {"add", [](const Tensor& x) { return sum(x + Tensor::from({3}, {1, 2, 3})); }},
      {"sub-broadcast", [](const Tensor& x) { return sum((x - sum(x, {1}, true)) * x); }},
      {"mul", [](const Tensor& x) { return sum(x * x * x); }},
      {"div", [](const Tensor& x) { return sum(x / (x * x + 1.0)); }},
      {"abs", [](const Tensor& x) { return sum(abs(x) * x); }},
      {"pow", [](const Tensor& x) { return sum(pow(abs(x) + 0.1, 1.7)); }},
      {"sqrt", [](const Tensor& x) { return sum(sqrt(x * x + 0.5)); }},
      {"tanh", [](const Tensor& x) { return sum(tanh(x) * x); }},
      {"sigmoid", [](const Tensor& x) { return sum(sigmoid(x) * x); }},
      {"exp", [](const Tensor& x) { return sum(exp(x)); }},
      {"log", [](const Tensor& x) { return sum(log(x * x + 1.0)); }},
      {"swish", [](const Tensor& x) { return sum(swish(x) * x); }},
      {"elu", [](const Tensor& x) { return sum(elu(x) * x); }},
      {"matmul", [](const Tensor& x) { return sum(tanh(matmul(x, transpose(x)))); }},
      {"sum-axis", [](const Tensor& x) { return sum(tanh(sum(x, {0}))); }},
      {"mean-axis", [](const Tensor& x) { return sum(tanh(mean(x, {1}, true)) * x); }},
      {"max", [](const Tensor& x) { return sum(reduce(ReduceKind::kMax, x * x, {1})); }},
      {"l2norm", [](const Tensor& x) { return sum(reduce(ReduceKind::kL2Norm, x, {0})); }},
      {"softmax", [](const Tensor& x) { return sum(softmax(x, 1) * x); }},
      {"narrow-concat", [](const Tensor& x) {
         return sum(tanh(concat({narrow(x, 1, 2, 1), narrow(x, 1, 0, 2)}, 1)) * x);
       }},
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor x = Tensor::randn({2, 3}, rng);
    for (const auto& [name, fn] : cases) {
      const auto r = gradcheck(fn, x, 1e-5, 1e-6);
      EXPECT_TRUE(r.passed) << name << " seed " << seed << " err " << r.max_rel_error
                            << " at " << r.worst;
    }
  }
}

TEST(ShapeOps, NarrowConcatStackSelect) {
  const Tensor m = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor n = narrow(m, 1, 1, 2);
  EXPECT_EQ(n.shape(), (Shape{2, 2}));
  EXPECT_EQ(n[0], 2.0);
  EXPECT_EQ(n[3], 6.0);
  const Tensor c = concat({m, m}, 0);
  EXPECT_EQ(c.shape(), (Shape{4, 3}));
  EXPECT_EQ(c[9], 4.0);
  const Tensor s = stack({m, m});
  EXPECT_EQ(s.shape(), (Shape{2, 2, 3}));
  const Tensor row = select(m, 1);
  EXPECT_EQ(row.shape(), (Shape{3}));
  EXPECT_EQ(row[0], 4.0);
  EXPECT_THROW(reshape(m, {4}), Error);
  EXPECT_THROW(narrow(m, 1, 2, 2), Error);
}

TEST(Gtf1, ByteLayout) {
  const Tensor t = Tensor::from({1, 2}, {1.0, -2.0});
  const auto bytes = encode_gtf1(t);
  const std::vector<std::uint8_t> expected = {
      'G', 'T', 'F', '1', 2, 0, 0, 0,   // rank
      1, 0, 0, 0, 0, 0, 0, 0,           // extent 0
      2, 0, 0, 0, 0, 0, 0, 0,           // extent 1
      0x00, 0x00, 0x80, 0x3f,           // 1.0f
      0x00, 0x00, 0x00, 0xc0};          // -2.0f
  EXPECT_EQ(bytes, expected);
}

TEST(Gtf1, RoundTripIsF32Rounding) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Shape s;
    const std::size_t rank = trial % 4;
    for (std::size_t d = 0; d < rank; ++d) s.push_back(1 + rng() % 5);
    const Tensor t = Tensor::randn(s, rng, 100.0);
    const Tensor back = decode_gtf1(encode_gtf1(t));
    ASSERT_EQ(back.shape(), s);
    for (std::size_t i = 0; i < t.numel(); ++i) EXPECT_EQ(back[i], round_to_f32(t[i]));
    EXPECT_EQ(encode_gtf1(back), encode_gtf1(t));
  }
}

TEST(Gtf1, RejectsCorruptData) {
  auto bytes = encode_gtf1(Tensor::ones({3}));
  bytes.pop_back();
  EXPECT_THROW(decode_gtf1(bytes), Error);
  bytes[0] = 'X';
  EXPECT_THROW(decode_gtf1(bytes), Error);
}

}  // namespace
}  // namespace gtfc
