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

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace gtfc {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

}  // namespace gtfc

namespace gtfc::blocks {

// Feature maps are (C, F, T). Every block returns the same shape it receives.

enum class GateOp { kSigmoid, kOnePlusElu, kOnePlusTanh };
enum class BlockKind { kNone, kSe, kCGtfc, kTfGtfc };

GateOp parse_gate_op(const std::string& name);  // throws kUnknownOperator
std::string gate_op_name(GateOp op);
BlockKind parse_block_kind(const std::string& name);  // "none", "se", "c-gtfc", "tf-gtfc"
std::string block_kind_name(BlockKind kind);

struct GtfcConfig {
  Real p = 2.0;
  std::size_t groups = 8;
  GateOp gate = GateOp::kOnePlusTanh;
  Real rho_init = 0.0;
  Real tau_init = 1.0;
  std::size_t attn_hidden = 0;  // 0 selects max(C/4, 4)
  Real epsilon = 1e-5;
  bool per_group_we = false;    // tf-GTFC: one W_e per group instead of shared
  std::size_t se_reduction = 16;

  std::size_t hidden_for(std::size_t channels) const;
  std::size_t se_bottleneck(std::size_t channels) const;  // max(C/r, 1)
  // Throws kDomainError for p <= 0, kConfigError for zero widths.
  void validate() const;
};

struct SeParams {
  std::size_t reduction = 16;
  Tensor w1;  // (C/r, C)
  Tensor w2;  // (C, C/r)

  static SeParams init(std::size_t channels, const GtfcConfig& config, std::mt19937_64& rng);
  ParamList named() const;
};

// Shared layout for both GTFC kinds. c-GTFC fills gamma/beta, tf-GTFC fills
// w_e/rho/tau; the other pair is left empty.
struct GtfcParams {
  Tensor lambda;   // (C)
  Tensor w_alpha;  // (H, C)
  Tensor b_alpha;  // (H)
  Tensor u_alpha;  // (H)
  Tensor gamma;    // (C)
  Tensor beta;     // (C)
  Tensor w_e;      // (C/G, C/G), or (G, C/G, C/G) with per_group_we
  Tensor rho;      // (G)
  Tensor tau;      // (G)

  static GtfcParams init(BlockKind kind, std::size_t channels, const GtfcConfig& config,
                         std::mt19937_64& rng);
  ParamList named(BlockKind kind) const;
};

// ---- operations ---------------------------------------------------------

Tensor se_block(const Tensor& x, const SeParams& params);

struct Embedding {
  Tensor g;      // (C)
  Tensor alpha;  // (F*T), attention over the grid in row-major (f, t) order
};

// Attentive lp pooling over the time-frequency grid. `w_alpha` is (H, C)
// matching the channel count of `x`.
Embedding lp_attentive_embed(const Tensor& x, const Tensor& lambda, const Tensor& w_alpha,
                             const Tensor& b_alpha, const Tensor& u_alpha, Real p);

// sqrt(C) * g / sqrt(sum g^2 + eps)
Tensor channel_normalize(const Tensor& g, Real epsilon);

Tensor channel_gate(const Tensor& x, const Tensor& g_hat, const Tensor& gamma,
                    const Tensor& beta, GateOp op);

Tensor c_gtfc(const Tensor& x, const GtfcParams& params, const GtfcConfig& config);

// Per-location score e_i = g^T W_e x_i normalised over the grid, then
// x_i * sigmoid(rho * e_hat_i + tau). Exposes intermediates for testing.
struct TfGtfcTrace {
  std::vector<Tensor> alpha;  // per group, (F*T)
  std::vector<Tensor> e;      // per group, (F*T)
  std::vector<Tensor> e_hat;  // per group, (F*T)
};
Tensor tf_gtfc(const Tensor& x, const GtfcParams& params, const GtfcConfig& config,
               TfGtfcTrace* trace = nullptr);

// Grid normalisation used by tf-GTFC: (e - mean) / (population std + eps).
Tensor grid_normalize(const Tensor& e, Real epsilon);

// Closed-form trainable parameter count of one block at `channels`.
//   se:      2 * C * max(C/r, 1)
//   c-gtfc:  C + H*C + 2H + 2C
//   tf-gtfc: C + H*C + 2H + n_we * (C/G)^2 + 2G,  n_we = G if per-group else 1
std::size_t param_count(BlockKind kind, std::size_t channels, const GtfcConfig& config);

// One recalibration block instance bound to a channel count.
class Block {
 public:
  Block() = default;
  Block(BlockKind kind, std::size_t channels, const GtfcConfig& config, std::mt19937_64& rng);

  BlockKind kind() const { return kind_; }
  std::size_t channels() const { return channels_; }
  const GtfcConfig& config() const { return config_; }
  Tensor forward(const Tensor& x) const;  // (C, F, T)
  ParamList params() const;

  void save(const std::filesystem::path& dir) const;
  static Block load(const std::filesystem::path& dir);

 private:
  BlockKind kind_ = BlockKind::kNone;
  std::size_t channels_ = 0;
  GtfcConfig config_;
  SeParams se_;
  GtfcParams gtfc_;
};

// key=value lines describing a config, and the inverse.
std::string config_to_text(const GtfcConfig& config);
GtfcConfig config_from_text(const std::string& text);

}  // namespace gtfc::blocks
