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
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>

#include "backbone/train.hpp"
#include "core/gradcheck.hpp"

namespace gtfc::backbone {
namespace {

using blocks::BlockKind;

void fill(Tensor t, Real v) {
  for (auto& x : t.mutable_data()) x = v;
}

void randomize(Tensor t, std::mt19937_64& rng, Real lo, Real hi) {
  std::uniform_real_distribution<Real> u(lo, hi);
  for (auto& x : t.mutable_data()) x = u(rng);
}

// ---- conv2d -----------------------------------------------------------------

// Direct six-loop cross-correlation.
std::vector<Real> naive_conv(const Tensor& x, const Tensor& w, std::size_t stride,
                             std::size_t pad, std::size_t& ho, std::size_t& wo) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  ho = (h + 2 * pad - k) / stride + 1;
  wo = (wd + 2 * pad - k) / stride + 1;
  std::vector<Real> out(n * cout * ho * wo, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          Real acc = 0;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = long(oy * stride + ky) - long(pad);
                const long ix = long(ox * stride + kx) - long(pad);
                if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(wd)) continue;
                acc += w[((co * cin + ci) * k + ky) * k + kx] *
                       x[((b * cin + ci) * h + std::size_t(iy)) * wd + std::size_t(ix)];
              }
          out[((b * cout + co) * ho + oy) * wo + ox] = acc;
        }
  return out;
}

TEST(Conv2d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(1);
  const Tensor x = Tensor::randn({3, 5, 7}, rng);
  Tensor w = Tensor::zeros({3, 3, 1, 1});
  auto d = w.mutable_data();
  for (std::size_t c = 0; c < 3; ++c) d[c * 3 + c] = 1.0;
  const Tensor y = conv2d(x, w, 1, 0);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv2d, OnesKernelCounts) {
  const Tensor y = conv2d(Tensor::ones({1, 3, 3}), Tensor::ones({1, 1, 3, 3}), 1, 1);
  const Real expected[] = {4, 6, 4, 6, 9, 6, 4, 6, 4};
  for (int i = 0; i < 9; ++i) EXPECT_EQ(y[i], expected[i]);
}

TEST(Conv2d, MatchesNaiveReference) {
  std::mt19937_64 rng(2);
  for (std::size_t trial = 0; trial < 12; ++trial) {
    const std::size_t k = trial % 2 ? 3 : 1, stride = 1 + trial % 3 / 2, pad = k == 3 ? 1 : 0;
    const Tensor x = Tensor::randn({2, 3, 5 + trial % 4, 6 + trial % 5}, rng);
    const Tensor w = Tensor::randn({4, 3, k, k}, rng);
    std::size_t ho, wo;
    const auto ref = naive_conv(x, w, stride, pad, ho, wo);
    const Tensor y = conv2d(x, w, stride, pad);
    ASSERT_EQ(y.shape(), (Shape{2, 4, ho, wo}));
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
  }
}

TEST(Conv2d, StrideTwoExtents) {
  const Tensor y = conv2d(Tensor::zeros({16, 32, 300}), Tensor::zeros({32, 16, 3, 3}), 2, 1);
  EXPECT_EQ(y.shape(), (Shape{32, 16, 150}));
  EXPECT_THROW(conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({1, 3, 3, 3}), 1, 1), Error);
}

TEST(Conv2d, Gradcheck) {
  std::mt19937_64 rng(3);
  for (std::size_t stride : {1u, 2u}) {
    Tensor x = Tensor::randn({2, 2, 5, 6}, rng, 1.0, true);
    Tensor w = Tensor::randn({3, 2, 3, 3}, rng, 1.0, true);
    const Tensor r = Tensor::randn({2, 3, stride == 1 ? 5u : 3u, stride == 1 ? 6u : 3u}, rng);
    const auto rep = gradcheck([&] { return sum(conv2d(x, w, stride, 1) * r); },
                               {{"x", x}, {"w", w}}, 1e-5, 1e-6);
    EXPECT_TRUE(rep.passed) << rep.worst << " " << rep.max_rel_error;
  }
}

// ---- batchnorm ------------------------------------------------------------------

TEST(BatchNorm, TrainModeCentres) {
  std::mt19937_64 rng(4);
  auto bn = BatchNormState::init(3);
  Tensor x = Tensor::randn({4, 3, 2, 5}, rng, 3.0);
  for (auto& v : x.mutable_data()) v += 2.0;
  const Tensor y = batchnorm(x, bn, Mode::kTrain);
  for (std::size_t c = 0; c < 3; ++c) {
    Real m = 0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t i = 0; i < 10; ++i) m += y[(b * 3 + c) * 10 + i];
    EXPECT_NEAR(m / 40, 0.0, 1e-5);
  }
  // momentum 0.9 toward the batch statistics
  EXPECT_NE(bn.running_mean[0], 0.0);
}

TEST(BatchNorm, EvalWithUnitStatsIsIdentity) {
  std::mt19937_64 rng(5);
  auto bn = BatchNormState::init(2);
  fill(bn.running_var, 1.0 - kBatchNormEps);
  const Tensor x = Tensor::randn({1, 2, 3, 3}, rng);
  const Tensor y = batchnorm(x, bn, Mode::kEval);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y[i], x[i], 1e-15);
  auto plain = BatchNormState::init(2);
  const Tensor z = batchnorm(x, plain, Mode::kEval);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(z[i], x[i], 1e-5 * std::abs(x[i]));
}

TEST(BatchNorm, ConstantChannelGivesZeros) {
  auto bn = BatchNormState::init(1);
  const Tensor y = batchnorm(Tensor::full({2, 1, 2, 2}, 3.5), bn, Mode::kTrain);
  for (Real v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, RunningStatistics) {
  auto bn = BatchNormState::init(1);
  const Tensor x = Tensor::from({1, 1, 1, 4}, {1, 2, 3, 6});
  batchnorm(x, bn, Mode::kTrain);
  EXPECT_NEAR(bn.running_mean[0], 0.1 * 3.0, 1e-15);
  EXPECT_NEAR(bn.running_var[0], 0.9 + 0.1 * 3.5, 1e-15);
}

TEST(BatchNorm, BatchTooSmall) {
  auto bn = BatchNormState::init(2);
  try {
    batchnorm(Tensor::ones({1, 2, 1, 1}), bn, Mode::kTrain);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBatchTooSmall);
  }
  EXPECT_NO_THROW(batchnorm(Tensor::ones({1, 2, 1, 1}), bn, Mode::kEval));
}

TEST(BatchNorm, Gradcheck) {
  std::mt19937_64 rng(6);
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    auto bn = BatchNormState::init(3);
    randomize(bn.gamma, rng, 0.5, 1.5);
    randomize(bn.beta, rng, -1, 1);
    randomize(bn.running_mean, rng, -1, 1);
    randomize(bn.running_var, rng, 0.5, 2);
    Tensor x = Tensor::randn({2, 3, 2, 3}, rng, 1.0, true);
    const Tensor r = Tensor::randn({2, 3, 2, 3}, rng);
    const auto rep = gradcheck([&] { return sum(batchnorm(x, bn, mode) * r); },
                               {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}}, 1e-5, 1e-6);
    EXPECT_TRUE(rep.passed) << rep.worst << " " << rep.max_rel_error;
  }
}

// ---- residual blocks -------------------------------------------------------------

TEST(BasicBlock, DegenerateParamsGiveSwish) {
  std::mt19937_64 rng(7);
  BasicBlockSpec spec{4, 4, 1, BlockKind::kNone, InsertPos::kAfterBn};
  auto b = make_residual_block(spec, blocks::GtfcConfig{}, rng);
  fill(b.conv2, 0.0);
  randomize(b.bn1.running_var, rng, 0.5, 2.0);
  const Tensor x = Tensor::randn({2, 4, 5, 6}, rng);
  const Tensor y = basic_block(x, b, Mode::kEval);
  const Tensor ref = swish(x);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], ref[i]);
}

TEST(BasicBlock, ShapeArithmetic) {
  std::mt19937_64 rng(8);
  BasicBlockSpec spec{16, 32, 2, BlockKind::kNone, InsertPos::kAfterBn};
  auto b = make_residual_block(spec, blocks::GtfcConfig{}, rng);
  const Tensor y = basic_block(Tensor::randn({1, 16, 32, 300}, rng), b, Mode::kEval);
  EXPECT_EQ(y.shape(), (Shape{1, 32, 16, 150}));
}

// Copies every same-named tensor of `src` into `dst`.
void copy_matching(Model& dst, const Model& src) {
  std::map<std::string, Tensor> by_name;
  for (const auto& p : src.params()) by_name.emplace(p.name, p.tensor);
  for (const auto& p : src.buffers()) by_name.emplace(p.name, p.tensor);
  auto copy = [&](const ParamList& list) {
    for (const auto& p : list) {
      const auto it = by_name.find(p.name);
      if (it == by_name.end()) continue;
      auto d = Tensor(p.tensor).mutable_data();
      std::copy(it->second.data().begin(), it->second.data().end(), d.begin());
    }
  };
  copy(dst.params());
  copy(dst.buffers());
}

ModelSpec small_spec(BlockKind kind, InsertPos pos) {
  ModelSpec s;
  s.stage_channels = {4, 8};
  s.blocks_per_stage = {1, 2};
  s.input_dim = 16;
  s.embedding_dim = 6;
  s.num_speakers = 3;
  s.insert_kind = kind;
  s.insert_pos = pos;
  s.block_config.groups = 2;
  return s;
}

// Pushes a few training batches through so running statistics are not trivial.
void warm_up(Model& m, std::mt19937_64& rng) {
  for (int i = 0; i < 3; ++i) m.forward(Tensor::randn({3, 1, m.spec().input_dim, 20}, rng), Mode::kTrain);
}

TEST(Invariants, CGtfcAtInitMatchesNoBlockExactly) {
  for (InsertPos pos : {InsertPos::kAfterBn, InsertPos::kBeforeBn, InsertPos::kBeforeConv}) {
    std::mt19937_64 rng(9);
    Model with(small_spec(BlockKind::kCGtfc, pos), 11);
    warm_up(with, rng);
    Model without(small_spec(BlockKind::kNone, pos), 12);
    copy_matching(without, with);
    const Tensor x = Tensor::randn({2, 1, 16, 24}, rng);
    const Tensor a = with.forward(x, Mode::kEval);
    const Tensor b = without.forward(x, Mode::kEval);
    for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a[i], b[i]) << insert_pos_name(pos);
  }
}

TEST(Invariants, TfGtfcAtInitEqualsSigmoidOneScaling) {
  std::mt19937_64 rng(10);
  Model with(small_spec(BlockKind::kTfGtfc, InsertPos::kAfterBn), 13);
  warm_up(with, rng);
  Model without(small_spec(BlockKind::kNone, InsertPos::kAfterBn), 14);
  copy_matching(without, with);
  // The block sits right after BN2, so scaling BN2's affine output by
  // sigmoid(1) reproduces it.
  const Real s = 1.0 / (1.0 + std::exp(-1.0));
  for (auto& b : without.residual_blocks()) {
    for (auto& v : b.bn2.gamma.mutable_data()) v *= s;
    for (auto& v : b.bn2.beta.mutable_data()) v *= s;
  }
  const Tensor x = Tensor::randn({2, 1, 16, 24}, rng);
  const Tensor a = with.forward(x, Mode::kEval);
  const Tensor b = without.forward(x, Mode::kEval);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(TemporalPool, Examples) {
  std::mt19937_64 rng(11);
  const Tensor one = Tensor::randn({3, 4, 1}, rng);
  const Tensor p = temporal_pool(one);
  ASSERT_EQ(p.shape(), (Shape{12}));
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(p[i], one[i]);
  const Tensor x = Tensor::randn({2, 3, 4, 7}, rng);
  const Tensor doubled = concat({x, x}, 3);
  const Tensor a = temporal_pool(x), b = temporal_pool(doubled);
  ASSERT_EQ(a.shape(), (Shape{2, 12}));
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

// ---- model ---------------------------------------------------------------------------

TEST(Model, EmbedIsDeterministicAndSized) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 3; ++trial) {
    ModelSpec s = small_spec(BlockKind::kCGtfc, InsertPos::kAfterBn);
    s.embedding_dim = 3 + rng() % 9;
    Model m(s, trial);
    const Tensor f = Tensor::randn({30, 16}, rng);
    const auto a = m.embed(f);
    const auto b = m.embed(f);
    EXPECT_EQ(a.size(), s.embedding_dim);
    EXPECT_EQ(a, b);
  }
}

TEST(Model, EvalEmbeddingIgnoresBatchComposition) {
  std::mt19937_64 rng(13);
  Model m(small_spec(BlockKind::kTfGtfc, InsertPos::kAfterBn), 3);
  warm_up(m, rng);
  const Tensor x = Tensor::randn({3, 1, 16, 20}, rng);
  const Tensor all = m.forward(x, Mode::kEval);
  for (std::size_t n = 0; n < 3; ++n) {
    const Tensor one = m.forward(reshape(select(x, n), {1, 1, 16, 20}), Mode::kEval);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(one[j], all[n * 6 + j]);
  }
}

TEST(Model, TooShort) {
  Model m(ModelSpec::desk(), 1);
  try {
    m.embed(Tensor::zeros({7, 64}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooShort);
  }
  EXPECT_EQ(m.embed(Tensor::zeros({8, 64})).size(), 16u);
}

TEST(Model, GroupMismatch) {
  ModelSpec s = ModelSpec::desk();
  s.insert_kind = BlockKind::kTfGtfc;
  s.block_config.groups = 8;  // first stage has 4 channels
  try {
    Model m(s, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGroupMismatch);
  }
}

TEST(Model, EndToEndGradcheck) {
  for (BlockKind kind : {BlockKind::kNone, BlockKind::kSe, BlockKind::kCGtfc, BlockKind::kTfGtfc}) {
    ModelSpec s;
    s.stage_channels = {4, 8};
    s.blocks_per_stage = {1, 1};
    s.input_dim = 8;
    s.embedding_dim = 4;
    s.num_speakers = 3;
    s.insert_kind = kind;
    s.block_config.groups = 2;
    s.block_config.se_reduction = 2;
    Model m(s, 21);
    std::mt19937_64 rng(22);
    std::vector<GradcheckLeaf> leaves;
    for (const auto& p : m.params()) {
      if (p.name.find("gamma") != std::string::npos && p.name.find("recal") != std::string::npos) {
        randomize(p.tensor, rng, -0.5, 0.5);
      }
      if (p.name.find("rho") != std::string::npos) randomize(p.tensor, rng, 0.2, 0.8);
      if (p.name.rfind("classifier.w", 0) == 0) randomize(p.tensor, rng, -0.5, 0.5);
      leaves.push_back({p.name, p.tensor});
    }
    const Tensor x = Tensor::randn({2, 1, 8, 12}, rng);
    const std::vector<std::size_t> labels{0, 2};
    const auto rep = gradcheck(
        [&] { return cross_entropy(m.logits(m.forward(x, Mode::kTrain)), labels); }, leaves,
        1e-5, 1e-4);
    EXPECT_TRUE(rep.passed) << blocks::block_kind_name(kind) << " " << rep.worst << " "
                            << rep.max_rel_error;
  }
}

TEST(Model, ParamLedgerMatchesEnumeration) {
  for (BlockKind kind : {BlockKind::kNone, BlockKind::kSe, BlockKind::kCGtfc, BlockKind::kTfGtfc}) {
    for (bool full : {false, true}) {
      ModelSpec s = full ? ModelSpec::full() : ModelSpec::desk();
      s.num_speakers = 8;
      s.insert_kind = kind;
      s.block_config.groups = full ? 8 : 4;
      const Model m(s, 1);
      std::size_t enumerated = 0;
      for (const auto& p : m.params()) enumerated += p.tensor.numel();
      EXPECT_EQ(m.num_params(), enumerated) << blocks::block_kind_name(kind);
    }
  }
}

TEST(Model, SpecTextRoundTrip) {
  ModelSpec s = ModelSpec::full();
  s.insert_kind = BlockKind::kTfGtfc;
  s.insert_pos = InsertPos::kBeforeBn;
  s.block_config.p = 1.0;
  s.num_speakers = 11;
  const ModelSpec t = ModelSpec::from_text(s.to_text());
  EXPECT_EQ(t.to_text(), s.to_text());
  EXPECT_THROW(ModelSpec::from_text("format=other\n"), Error);
}

// ---- training -----------------------------------------------------------------------

TEST(Training, ZeroLearningRateLeavesParamsUnchanged) {
  std::mt19937_64 rng(30);
  Model m(small_spec(BlockKind::kCGtfc, InsertPos::kAfterBn), 5);
  Sgd opt(m.params(), 0.0, 0.9, 1e-4);
  std::vector<std::vector<Real>> before;
  for (const auto& p : m.params()) before.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  const Tensor x = Tensor::randn({3, 1, 16, 20}, rng);
  const Real l1 = train_step(m, opt, x, {0, 1, 2});
  const Real l2 = train_step(m, opt, x, {0, 1, 2});
  EXPECT_EQ(l1, l2);
  const auto after = m.params();
  for (std::size_t k = 0; k < after.size(); ++k) {
    for (std::size_t i = 0; i < before[k].size(); ++i) ASSERT_EQ(after[k].tensor[i], before[k][i]);
  }
}

TEST(Training, InitialLossNearLogK) {
  std::mt19937_64 rng(31);
  ModelSpec s = ModelSpec::desk();
  s.num_speakers = 8;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Model m(s, seed);
    const Tensor x = Tensor::randn({8, 1, 64, 40}, rng);
    const Tensor loss =
        cross_entropy(m.logits(m.forward(x, Mode::kTrain)), {0, 1, 2, 3, 4, 5, 6, 7});
    EXPECT_NEAR(loss.item(), std::log(8.0), 0.1 * std::log(8.0));
  }
}

TEST(Training, SingleSampleOverfit) {
  std::mt19937_64 rng(32);
  ModelSpec s = ModelSpec::desk();
  s.num_speakers = 4;
  Model m(s, 7);
  Sgd opt(m.params(), 0.01, 0.9, 1e-4);
  const Tensor x = Tensor::randn({1, 1, 64, 48}, rng);
  Real loss = 0;
  int steps = 0;
  for (; steps < 500; ++steps) {
    loss = train_step(m, opt, x, {2});
    if (loss < 0.01) break;
  }
  EXPECT_LT(loss, 0.01) << "after " << steps << " steps";
}

TEST(Training, NonFiniteLossAborts) {
  Model m(small_spec(BlockKind::kNone, InsertPos::kAfterBn), 5);
  Sgd opt(m.params(), 0.1, 0.9, 0.0);
  Tensor x = Tensor::zeros({2, 1, 16, 10});
  x.mutable_data()[3] = std::nan("");
  const Real before = m.params()[0].tensor[0];
  try {
    train_step(m, opt, x, {0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteLoss);
  }
  EXPECT_EQ(m.params()[0].tensor[0], before);
}

TEST(Training, PlateauScheduler) {
  PlateauScheduler s(0.1, 2);
  Real lr = 1.0;
  lr = s.observe(5.0, lr);
  lr = s.observe(4.0, lr);
  lr = s.observe(4.5, lr);
  EXPECT_EQ(lr, 1.0);
  lr = s.observe(4.0, lr);  // not strictly better
  EXPECT_DOUBLE_EQ(lr, 0.1);
  lr = s.observe(3.0, lr);
  EXPECT_DOUBLE_EQ(lr, 0.1);
}

std::vector<TrainExample> toy_data(std::size_t speakers, std::size_t per, std::size_t f,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Tensor> means;
  for (std::size_t s = 0; s < speakers; ++s) means.push_back(Tensor::randn({f}, rng));
  std::vector<TrainExample> out;
  for (std::size_t s = 0; s < speakers; ++s) {
    for (std::size_t u = 0; u < per; ++u) {
      const std::size_t t = 30 + rng() % 20;
      Tensor x = Tensor::randn({t, f}, rng, 0.5);
      auto d = x.mutable_data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += means[s][i % f];
      out.push_back({"u" + std::to_string(out.size()), x, s});
    }
  }
  return out;
}

TEST(Training, DeterministicUnderSeedAndLogged) {
  const auto data = toy_data(3, 6, 16, 40);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.chunk_min = 16;
  cfg.chunk_max = 24;
  cfg.lr = 0.05;
  cfg.seed = 9;
  std::ostringstream log1, log2;
  Model a(small_spec(BlockKind::kTfGtfc, InsertPos::kAfterBn), 3);
  Model b(small_spec(BlockKind::kTfGtfc, InsertPos::kAfterBn), 3);
  const auto ra = train(a, data, cfg, &log1);
  const auto rb = train(b, data, cfg, &log2);
  EXPECT_EQ(ra.step_losses, rb.step_losses);
  EXPECT_EQ(log1.str(), log2.str());
  EXPECT_EQ(ra.val_losses.size(), 2u);
  std::istringstream is(log1.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(is, line)) {
    ++lines;
    EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 2) << line;
  }
  EXPECT_EQ(lines, ra.step_losses.size());
}

TEST(Training, ToyProblemConverges) {
  const auto data = toy_data(3, 10, 16, 41);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 6;
  cfg.chunk_min = 16;
  cfg.chunk_max = 24;
  cfg.lr = 0.05;
  Model m(small_spec(BlockKind::kCGtfc, InsertPos::kAfterBn), 4);
  const auto r = train(m, data, cfg);
  EXPECT_LT(r.final_loss, r.initial_loss / 2);
}

// ---- checkpoints ---------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

TEST(Checkpoint, RoundTripPreservesEmbeddings) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "gtfc_ckpt_test";
  fs::remove_all(root);
  std::mt19937_64 rng(50);
  for (BlockKind kind : {BlockKind::kNone, BlockKind::kSe, BlockKind::kTfGtfc}) {
    Model m(small_spec(kind, InsertPos::kAfterBn), 8);
    warm_up(m, rng);
    round_params_to_f32(m);
    const fs::path dir = root / blocks::block_kind_name(kind);
    m.save(dir);
    EXPECT_TRUE(fs::exists(dir / "spec.txt"));
    EXPECT_EQ(fs::exists(dir / "block_0" / "manifest.txt"), kind != BlockKind::kNone);
    Model loaded = Model::load(dir);
    const Tensor f = Tensor::randn({25, 16}, rng);
    EXPECT_EQ(m.embed(f), loaded.embed(f));
    loaded.save(root / "again");
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), dir);
      EXPECT_EQ(slurp(e.path()), slurp(root / "again" / rel)) << rel;
    }
    fs::remove_all(root / "again");
  }
  fs::remove_all(root);
}

}  // namespace
}  // namespace gtfc::backbone
