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

#include "blocks/blocks.hpp"

#include <cmath>

namespace gtfc::blocks {

namespace {

void require_map(const Tensor& x, const char* who) {
  if (x.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch, std::string(who) + " expects a (C, F, T) map, got " +
                                               shape_string(x.shape()));
  }
}

void require_shape(const Tensor& t, const Shape& want, const char* what) {
  if (t.shape() != want) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + " has shape " +
                                               shape_string(t.shape()) + ", expected " +
                                               shape_string(want));
  }
}

Tensor param(const Shape& shape, Real value) { return Tensor::full(shape, value, true); }

Tensor gaussian(const Shape& shape, std::mt19937_64& rng, Real stddev) {
  return Tensor::randn(shape, rng, stddev, true);
}

}  // namespace

GateOp parse_gate_op(const std::string& name) {
  if (name == "sigmoid") return GateOp::kSigmoid;
  if (name == "one_plus_elu" || name == "1+elu") return GateOp::kOnePlusElu;
  if (name == "one_plus_tanh" || name == "1+tanh") return GateOp::kOnePlusTanh;
  throw Error(ErrorCode::kUnknownOperator, "unknown gate operator '" + name + "'");
}

std::string gate_op_name(GateOp op) {
  switch (op) {
    case GateOp::kSigmoid: return "sigmoid";
    case GateOp::kOnePlusElu: return "one_plus_elu";
    case GateOp::kOnePlusTanh: return "one_plus_tanh";
  }
  return "?";
}

BlockKind parse_block_kind(const std::string& name) {
  if (name == "none") return BlockKind::kNone;
  if (name == "se") return BlockKind::kSe;
  if (name == "c-gtfc") return BlockKind::kCGtfc;
  if (name == "tf-gtfc") return BlockKind::kTfGtfc;
  throw Error(ErrorCode::kUnknownOperator, "unknown block kind '" + name + "'");
}

std::string block_kind_name(BlockKind kind) {
  switch (kind) {
    case BlockKind::kNone: return "none";
    case BlockKind::kSe: return "se";
    case BlockKind::kCGtfc: return "c-gtfc";
    case BlockKind::kTfGtfc: return "tf-gtfc";
  }
  return "?";
}

std::size_t GtfcConfig::hidden_for(std::size_t channels) const {
  return attn_hidden ? attn_hidden : std::max<std::size_t>(channels / 4, 4);
}

std::size_t GtfcConfig::se_bottleneck(std::size_t channels) const {
  return std::max<std::size_t>(channels / se_reduction, 1);
}

void GtfcConfig::validate() const {
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw Error(ErrorCode::kDomainError, "norm order p must be positive");
  }
  if (groups == 0) throw Error(ErrorCode::kConfigError, "group count must be positive");
  if (se_reduction == 0) throw Error(ErrorCode::kConfigError, "SE reduction must be positive");
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::kConfigError, "epsilon must be non-negative");
}

SeParams SeParams::init(std::size_t channels, const GtfcConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::size_t hidden = config.se_bottleneck(channels);
  SeParams s;
  s.reduction = config.se_reduction;
  s.w1 = gaussian({hidden, channels}, rng, std::sqrt(2.0 / channels));
  s.w2 = gaussian({channels, hidden}, rng, std::sqrt(1.0 / hidden));
  return s;
}

ParamList SeParams::named() const { return {{"se_w1", w1}, {"se_w2", w2}}; }

GtfcParams GtfcParams::init(BlockKind kind, std::size_t channels, const GtfcConfig& config,
                            std::mt19937_64& rng) {
  config.validate();
  if (kind != BlockKind::kCGtfc && kind != BlockKind::kTfGtfc) {
    throw Error(ErrorCode::kInvalidArgument, "GtfcParams needs a GTFC block kind");
  }
  const std::size_t h = config.hidden_for(channels);
  GtfcParams g;
  g.lambda = param({channels}, 1.0);
  g.w_alpha = gaussian({h, channels}, rng, 1.0 / std::sqrt(static_cast<Real>(channels)));
  g.b_alpha = param({h}, 0.0);
  g.u_alpha = gaussian({h}, rng, 1.0 / std::sqrt(static_cast<Real>(h)));
  if (kind == BlockKind::kCGtfc) {
    g.gamma = param({channels}, 0.0);
    g.beta = param({channels}, 0.0);
    return g;
  }
  if (channels % config.groups != 0) {
    throw Error(ErrorCode::kGroupMismatch, std::to_string(channels) +
                                               " channels cannot split into " +
                                               std::to_string(config.groups) + " groups");
  }
  const std::size_t cg = channels / config.groups;
  const Shape we_shape = config.per_group_we ? Shape{config.groups, cg, cg} : Shape{cg, cg};
  g.w_e = gaussian(we_shape, rng, 1.0 / std::sqrt(static_cast<Real>(cg)));
  g.rho = param({config.groups}, config.rho_init);
  g.tau = param({config.groups}, config.tau_init);
  return g;
}

ParamList GtfcParams::named(BlockKind kind) const {
  ParamList out{{"lambda", lambda}, {"w_alpha", w_alpha}, {"b_alpha", b_alpha},
                {"u_alpha", u_alpha}};
  if (kind == BlockKind::kCGtfc) {
    out.push_back({"gamma", gamma});
    out.push_back({"beta", beta});
  } else {
    out.push_back({"w_e", w_e});
    out.push_back({"rho", rho});
    out.push_back({"tau", tau});
  }
  return out;
}

Tensor se_block(const Tensor& x, const SeParams& params) {
  require_map(x, "se_block");
  const std::size_t c = x.dim(0);
  const std::size_t hidden = params.w1.dim(0);
  require_shape(params.w1, {hidden, c}, "se_w1");
  require_shape(params.w2, {c, hidden}, "se_w2");
  const Tensor z = reshape(mean(x, {1, 2}), {c, 1});
  const Tensor a = sigmoid(matmul(params.w2, relu(matmul(params.w1, z))));
  return x * reshape(a, {c, 1, 1});
}

Embedding lp_attentive_embed(const Tensor& x, const Tensor& lambda, const Tensor& w_alpha,
                             const Tensor& b_alpha, const Tensor& u_alpha, Real p) {
  require_map(x, "lp_attentive_embed");
  if (!(p > 0.0)) throw Error(ErrorCode::kDomainError, "norm order p must be positive");
  const std::size_t c = x.dim(0), m = x.dim(1) * x.dim(2);
  if (m == 0) throw Error(ErrorCode::kShapeMismatch, "empty time-frequency grid");
  const std::size_t h = w_alpha.dim(0);
  require_shape(lambda, {c}, "lambda");
  require_shape(w_alpha, {h, c}, "w_alpha");
  require_shape(b_alpha, {h}, "b_alpha");
  require_shape(u_alpha, {h}, "u_alpha");

  const Tensor a = pow(abs(reshape(x, {c, m})), p);                        // (C, M)
  const Tensor hid = tanh(matmul(w_alpha, a) + reshape(b_alpha, {h, 1}));  // (H, M)
  const Tensor alpha = softmax(matmul(reshape(u_alpha, {1, h}), hid), 1);  // (1, M)
  const Tensor pooled = sum(a * alpha, {1});                               // (C)
  Embedding out;
  out.g = lambda * (p == 1.0 ? pooled : pow(pooled, 1.0 / p));
  out.alpha = reshape(alpha, {m});
  return out;
}

Tensor channel_normalize(const Tensor& g, Real epsilon) {
  if (g.rank() != 1) throw Error(ErrorCode::kShapeMismatch, "channel_normalize expects (C)");
  const Real k = std::sqrt(static_cast<Real>(g.dim(0)));
  return g * k / sqrt(sum(g * g) + epsilon);
}

Tensor channel_gate(const Tensor& x, const Tensor& g_hat, const Tensor& gamma,
                    const Tensor& beta, GateOp op) {
  require_map(x, "channel_gate");
  const std::size_t c = x.dim(0);
  require_shape(g_hat, {c}, "g_hat");
  require_shape(gamma, {c}, "gamma");
  require_shape(beta, {c}, "beta");
  const Tensor z = gamma * g_hat + beta;
  Tensor scale;
  switch (op) {
    case GateOp::kSigmoid: scale = sigmoid(z); break;
    case GateOp::kOnePlusElu: scale = 1.0 + elu(z); break;
    case GateOp::kOnePlusTanh: scale = 1.0 + tanh(z); break;
    default: throw Error(ErrorCode::kUnknownOperator, "unknown gate operator");
  }
  return x * reshape(scale, {c, 1, 1});
}

Tensor c_gtfc(const Tensor& x, const GtfcParams& params, const GtfcConfig& config) {
  config.validate();
  const Embedding emb = lp_attentive_embed(x, params.lambda, params.w_alpha, params.b_alpha,
                                           params.u_alpha, config.p);
  return channel_gate(x, channel_normalize(emb.g, config.epsilon), params.gamma, params.beta,
                      config.gate);
}

Tensor grid_normalize(const Tensor& e, Real epsilon) {
  const Tensor centered = e - mean(e);
  const Tensor sd = sqrt(mean(centered * centered));
  return centered / (sd + epsilon);
}

Tensor tf_gtfc(const Tensor& x, const GtfcParams& params, const GtfcConfig& config,
               TfGtfcTrace* trace) {
  config.validate();
  require_map(x, "tf_gtfc");
  const std::size_t c = x.dim(0), f = x.dim(1), t = x.dim(2), m = f * t;
  const std::size_t groups = config.groups;
  if (c % groups != 0) {
    throw Error(ErrorCode::kGroupMismatch,
                std::to_string(c) + " channels cannot split into " + std::to_string(groups) +
                    " groups");
  }
  const std::size_t cg = c / groups;
  const Shape we_shape = config.per_group_we ? Shape{groups, cg, cg} : Shape{cg, cg};
  require_shape(params.w_e, we_shape, "w_e");
  require_shape(params.rho, {groups}, "rho");
  require_shape(params.tau, {groups}, "tau");
  require_shape(params.w_alpha, {params.w_alpha.dim(0), c}, "w_alpha");

  std::vector<Tensor> outs;
  outs.reserve(groups);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const auto start = gi * cg;
    const Tensor xg = narrow(x, 0, start, cg);
    const Embedding emb =
        lp_attentive_embed(xg, narrow(params.lambda, 0, start, cg),
                           narrow(params.w_alpha, 1, start, cg), params.b_alpha,
                           params.u_alpha, config.p);
    const Tensor g_hat = channel_normalize(emb.g, config.epsilon);
    const Tensor we = config.per_group_we ? select(params.w_e, gi) : params.w_e;
    const Tensor flat = reshape(xg, {cg, m});
    const Tensor e = reshape(matmul(matmul(reshape(g_hat, {1, cg}), we), flat), {m});
    const Tensor e_hat = grid_normalize(e, config.epsilon);
    const Tensor s = narrow(params.rho, 0, gi, 1) * e_hat + narrow(params.tau, 0, gi, 1);
    outs.push_back(flat * reshape(sigmoid(s), {1, m}));
    if (trace) {
      trace->alpha.push_back(emb.alpha);
      trace->e.push_back(e);
      trace->e_hat.push_back(e_hat);
    }
  }
  return reshape(concat(outs, 0), {c, f, t});
}

std::size_t param_count(BlockKind kind, std::size_t channels, const GtfcConfig& config) {
  const std::size_t c = channels, h = config.hidden_for(c);
  switch (kind) {
    case BlockKind::kNone: return 0;
    case BlockKind::kSe: return 2 * c * config.se_bottleneck(c);
    case BlockKind::kCGtfc: return c + h * c + 2 * h + 2 * c;
    case BlockKind::kTfGtfc: {
      const std::size_t cg = c / config.groups;
      const std::size_t n_we = config.per_group_we ? config.groups : 1;
      return c + h * c + 2 * h + n_we * cg * cg + 2 * config.groups;
    }
  }
  return 0;
}

Block::Block(BlockKind kind, std::size_t channels, const GtfcConfig& config,
             std::mt19937_64& rng)
    : kind_(kind), channels_(channels), config_(config) {
  config_.validate();
  if (kind == BlockKind::kSe) se_ = SeParams::init(channels, config, rng);
  if (kind == BlockKind::kCGtfc || kind == BlockKind::kTfGtfc) {
    gtfc_ = GtfcParams::init(kind, channels, config, rng);
  }
}

Tensor Block::forward(const Tensor& x) const {
  switch (kind_) {
    case BlockKind::kNone: return x;
    case BlockKind::kSe: return se_block(x, se_);
    case BlockKind::kCGtfc: return c_gtfc(x, gtfc_, config_);
    case BlockKind::kTfGtfc: return tf_gtfc(x, gtfc_, config_);
  }
  return x;
}

ParamList Block::params() const {
  switch (kind_) {
    case BlockKind::kNone: return {};
    case BlockKind::kSe: return se_.named();
    default: return gtfc_.named(kind_);
  }
}

}  // namespace gtfc::blocks
