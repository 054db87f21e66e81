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

#include "backbone/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>

#include "core/serialize.hpp"

namespace gtfc::backbone {

Sgd::Sgd(ParamList params, Real lr, Real momentum, Real weight_decay)
    : params_(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& p : params_) velocity_.emplace_back(p.tensor.numel(), 0.0);
}

void Sgd::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor t = params_[k].tensor;
    const bool has = t.has_grad();
    const auto g = has ? t.grad() : std::vector<Real>();
    auto theta = t.mutable_data();
    auto& v = velocity_[k];
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = momentum_ * v[i] + (has ? g[i] : 0.0) + weight_decay_ * theta[i];
      theta[i] -= lr_ * v[i];
    }
  }
}

void Sgd::zero_grad() {
  for (auto& p : params_) Tensor(p.tensor).zero_grad();
}

Real PlateauScheduler::observe(Real loss, Real lr) {
  if (!seen_ || loss < best_) {
    best_ = loss;
    seen_ = true;
    stale_ = 0;
    return lr;
  }
  if (++stale_ >= patience_) {
    stale_ = 0;
    return lr * factor_;
  }
  return lr;
}

Real train_step(Model& model, Sgd& optimizer, const Tensor& batch,
                const std::vector<std::size_t>& labels) {
  optimizer.zero_grad();
  const Tensor loss = cross_entropy(model.logits(model.forward(batch, Mode::kTrain)), labels);
  const Real value = loss.item();
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << "loss became " << value << " at lr " << optimizer.lr() << " on a batch of "
       << labels.size();
    throw Error(ErrorCode::kNonFiniteLoss, os.str());
  }
  backward(loss);
  optimizer.step();
  return value;
}

void round_params_to_f32(Model& model) {
  auto round_all = [](const ParamList& list) {
    for (const auto& p : list) {
      for (auto& v : Tensor(p.tensor).mutable_data()) v = round_to_f32(v);
    }
  };
  round_all(model.params());
  round_all(model.buffers());
}

namespace {

// (T, F) rows [start, start + len) -> transposed into the (F, len) slot.
void write_chunk(const Tensor& features, std::size_t start, std::size_t len, Real* dst) {
  const std::size_t f = features.dim(1);
  auto v = features.data();
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t j = 0; j < f; ++j) dst[j * len + t] = v[(start + t) * f + j];
  }
}

Real validation_loss(Model& model, const std::vector<const TrainExample*>& val,
                     std::size_t chunk_max) {
  Real total = 0.0;
  const std::size_t f = model.spec().input_dim;
  for (const auto* ex : val) {
    const std::size_t t = ex->features.dim(0);
    const std::size_t len = std::min(t, chunk_max);
    std::vector<Real> buf(f * len);
    write_chunk(ex->features, (t - len) / 2, len, buf.data());
    const Tensor x = Tensor::from({1, 1, f, len}, std::move(buf));
    total += cross_entropy(model.logits(model.forward(x, Mode::kEval)), {ex->label}).item();
  }
  return total / Real(val.size());
}

}  // namespace

TrainResult train(Model& model, const std::vector<TrainExample>& data, const TrainConfig& cfg,
                  std::ostream* log) {
  if (data.empty()) throw Error(ErrorCode::kInvalidArgument, "no training examples");
  if (cfg.batch_size == 0 || cfg.chunk_min == 0 || cfg.chunk_min > cfg.chunk_max) {
    throw Error(ErrorCode::kConfigError, "need batch_size > 0 and 0 < chunk_min <= chunk_max");
  }
  const std::size_t f = model.spec().input_dim;
  for (const auto& ex : data) {
    if (ex.features.rank() != 2 || ex.features.dim(1) != f) {
      throw Error(ErrorCode::kShapeMismatch, ex.id + ": features must be (T, " +
                                                 std::to_string(f) + ")");
    }
    if (ex.features.dim(0) < model.spec().min_frames()) {
      throw Error(ErrorCode::kTooShort, ex.id + " has only " +
                                            std::to_string(ex.features.dim(0)) + " frames");
    }
    if (ex.label >= model.spec().num_speakers) {
      throw Error(ErrorCode::kInvalidArgument, ex.id + ": label out of range");
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * Real(data.size())));
  std::vector<const TrainExample*> val, train_set;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val : train_set).push_back(&data[order[i]]);
  }
  if (train_set.empty()) throw Error(ErrorCode::kInvalidArgument, "validation took every example");

  if (cfg.f32_params) round_params_to_f32(model);
  Sgd opt(model.params(), cfg.lr, cfg.momentum, cfg.weight_decay);
  PlateauScheduler plateau(cfg.plateau_factor, cfg.plateau_patience);
  TrainResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train_set.begin(), train_set.end(), rng);
    Real epoch_total = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t b0 = 0; b0 < train_set.size(); b0 += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, train_set.size() - b0);
      std::size_t shortest = SIZE_MAX;
      for (std::size_t i = 0; i < n; ++i) {
        shortest = std::min(shortest, train_set[b0 + i]->features.dim(0));
      }
      const std::size_t hi = std::min(cfg.chunk_max, shortest);
      const std::size_t lo = std::min(cfg.chunk_min, hi);
      const std::size_t len = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
      std::vector<Real> buf(n * f * len);
      std::vector<std::size_t> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        const TrainExample& ex = *train_set[b0 + i];
        const std::size_t start =
            std::uniform_int_distribution<std::size_t>(0, ex.features.dim(0) - len)(rng);
        write_chunk(ex.features, start, len, buf.data() + i * f * len);
        labels[i] = ex.label;
      }
      const Tensor batch = Tensor::from({n, 1, f, len}, std::move(buf));
      const Real loss = train_step(model, opt, batch, labels);
      if (cfg.f32_params) round_params_to_f32(model);
      ++step;
      if (result.step_losses.empty()) result.initial_loss = loss;
      result.step_losses.push_back(loss);
      epoch_total += loss;
      ++epoch_steps;
      if (log) *log << step << '\t' << loss << '\t' << opt.lr() << '\n';
    }
    result.epoch_losses.push_back(epoch_total / Real(epoch_steps));
    if (!val.empty()) {
      const Real v = validation_loss(model, val, cfg.chunk_max);
      result.val_losses.push_back(v);
      opt.set_lr(plateau.observe(v, opt.lr()));
    }
  }
  opt.zero_grad();
  result.final_loss = result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back();
  result.final_lr = opt.lr();
  return result;
}

}  // namespace gtfc::backbone
