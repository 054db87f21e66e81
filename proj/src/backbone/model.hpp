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

#include "backbone/layers.hpp"
#include "blocks/blocks.hpp"

namespace gtfc::backbone {

enum class InsertPos { kAfterBn, kBeforeBn, kBeforeConv };

InsertPos parse_insert_pos(const std::string& name);  // after_bn, before_bn, before_conv
std::string insert_pos_name(InsertPos pos);

struct BasicBlockSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t stride = 1;
  blocks::BlockKind insert_kind = blocks::BlockKind::kNone;
  InsertPos insert_pos = InsertPos::kAfterBn;

  bool has_projection() const { return stride != 1 || in_channels != out_channels; }
  // Channel count the recalibration block sees at this position.
  std::size_t block_channels() const;
};

struct ModelSpec {
  std::vector<std::size_t> stage_channels{4, 8, 16, 32};
  std::vector<std::size_t> blocks_per_stage{1, 1, 1, 1};
  std::size_t embedding_dim = 16;
  std::size_t num_speakers = 2;
  std::size_t input_dim = 64;
  blocks::BlockKind insert_kind = blocks::BlockKind::kNone;
  InsertPos insert_pos = InsertPos::kAfterBn;
  blocks::GtfcConfig block_config;

  static ModelSpec desk();
  static ModelSpec full();
  // Throws kConfigError (inconsistent lists) or kGroupMismatch.
  void validate() const;
  std::vector<BasicBlockSpec> residual_blocks() const;
  std::size_t downsampling() const;  // product of stage strides
  // Shortest input that survives every stride-2 stage with at least one frame.
  std::size_t min_frames() const { return downsampling(); }
  std::size_t pooled_dim() const;  // C_last * F_last

  std::string to_text() const;
  static ModelSpec from_text(const std::string& text);
};

struct ResidualBlock {
  BasicBlockSpec spec;
  Tensor conv1, conv2;  // (out, in, 3, 3), (out, out, 3, 3)
  BatchNormState bn1, bn2;
  Tensor proj;          // (out, in, 1, 1) when projecting
  BatchNormState proj_bn;
  blocks::Block recal;
};

ResidualBlock make_residual_block(const BasicBlockSpec& spec, const blocks::GtfcConfig& config,
                                  std::mt19937_64& rng);

// conv-BN-swish-conv-BN plus shortcut, then swish. The recalibration block
// sits between the second BN and the residual add (after_bn), between the
// second conv and its BN (before_bn), or on the residual branch input
// (before_conv). x: (N, C, F, T).
Tensor basic_block(const Tensor& x, ResidualBlock& block, Mode mode);

// Stem conv/BN/swish, residual stages, temporal mean pooling, a linear
// embedding layer and a linear speaker classifier.
class Model {
 public:
  Model() = default;
  Model(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }

  // x: (N, 1, F, T) -> embeddings (N, E).
  Tensor forward(const Tensor& x, Mode mode);
  Tensor logits(const Tensor& embeddings) const;

  // Eval-mode embedding of one (T, F) feature matrix. Throws kTooShort.
  std::vector<Real> embed(const Tensor& features);

  // Trainable parameters, in a fixed order.
  ParamList params() const;
  // Running statistics (not trained).
  ParamList buffers() const;

  struct ModuleCount {
    std::string name;
    std::size_t count;
  };
  // Closed-form count per module; their sum equals the enumerated total.
  std::vector<ModuleCount> param_ledger() const;
  std::size_t num_params() const;

  std::vector<ResidualBlock>& residual_blocks() { return blocks_; }
  BatchNormState& stem_bn() { return stem_bn_; }

  void save(const std::filesystem::path& dir) const;
  static Model load(const std::filesystem::path& dir);

 private:
  ModelSpec spec_;
  Tensor stem_conv_;
  BatchNormState stem_bn_;
  std::vector<ResidualBlock> blocks_;
  Tensor embed_w_, embed_b_;
  Tensor cls_w_, cls_b_;
};

// Runs a recalibration block on each sample of an (N, C, F, T) batch.
Tensor apply_block_batched(const blocks::Block& block, const Tensor& x);

}  // namespace gtfc::backbone
