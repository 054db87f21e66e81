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

#include <ostream>
#include <string>
#include <vector>

#include "backbone/model.hpp"

namespace gtfc::backbone {

// SGD with momentum and L2 weight decay:
//   v <- mu * v + (grad + wd * theta);  theta <- theta - lr * v
class Sgd {
 public:
  Sgd(ParamList params, Real lr, Real momentum, Real weight_decay);
  void step();
  void zero_grad();
  Real lr() const { return lr_; }
  void set_lr(Real lr) { lr_ = lr; }
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  std::vector<std::vector<Real>> velocity_;
  Real lr_, momentum_, weight_decay_;
};

// Multiplies the learning rate by `factor` once the monitored loss has failed
// to improve for `patience` consecutive observations.
class PlateauScheduler {
 public:
  PlateauScheduler(Real factor, std::size_t patience) : factor_(factor), patience_(patience) {}
  Real observe(Real loss, Real lr);

 private:
  Real factor_;
  std::size_t patience_;
  Real best_ = 0.0;
  bool seen_ = false;
  std::size_t stale_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 8;
  Real lr = 1e-3;
  Real momentum = 0.9;
  Real weight_decay = 1e-4;
  Real plateau_factor = 0.1;
  std::size_t plateau_patience = 10;
  Real val_fraction = 0.1;
  std::size_t chunk_min = 300;
  std::size_t chunk_max = 800;
  bool f32_params = false;  // round parameters through f32 after every update
  std::uint64_t seed = 1;
};

struct TrainExample {
  std::string id;
  Tensor features;  // (T, F), normalised, voiced frames only
  std::size_t label = 0;
};

// One forward/backward/update on a (N, 1, F, T) batch. Returns the loss
// measured before the update; throws kNonFiniteLoss without updating.
Real train_step(Model& model, Sgd& optimizer, const Tensor& batch,
                const std::vector<std::size_t>& labels);

struct TrainResult {
  std::vector<Real> step_losses;
  std::vector<Real> epoch_losses;  // mean training loss per epoch
  std::vector<Real> val_losses;    // empty without a validation split
  Real initial_loss = 0.0;         // first step
  Real final_loss = 0.0;           // mean over the last epoch
  Real final_lr = 0.0;
};

// Writes one `step<TAB>loss<TAB>lr` line per step to `log` when given.
TrainResult train(Model& model, const std::vector<TrainExample>& data,
                  const TrainConfig& config, std::ostream* log = nullptr);

// Rounds every parameter and running statistic through f32.
void round_params_to_f32(Model& model);

}  // namespace gtfc::backbone
