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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "backbone/train.hpp"
#include "core/gradcheck.hpp"
#include "frontend/frontend.hpp"
#include "frontend/synth.hpp"
#include "metrics/metrics.hpp"

namespace gtfc::pipeline {

// String key/value settings shared by every command. Unknown keys are
// rejected on set; values are parsed when a config is built from them.
class Options {
 public:
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::uint64_t seed() const;
  bool f32() const;  // precision=f32
  frontend::FrontendConfig frontend() const;
  frontend::SynthConfig synth() const;
  blocks::GtfcConfig block_config() const;
  blocks::BlockKind block_kind() const;
  // Model layout for `num_speakers` classes.
  backbone::ModelSpec model_spec(std::size_t num_speakers) const;
  backbone::TrainConfig train_config() const;

  static const std::vector<std::string>& known_keys();

 private:
  std::string get(const std::string& key, const std::string& fallback) const;
  std::map<std::string, std::string> values_;
};

// One line per utterance: utt_id<TAB>speaker_id<TAB>path<TAB>num_frames.
// Paths are stored relative to the manifest's directory.
struct ManifestEntry {
  std::string utt_id;
  std::string speaker_id;
  std::filesystem::path path;  // features; the VAD mask sits beside it
  std::size_t num_frames = 0;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

using LogFn = std::function<void(const std::string&)>;

struct ExtractReport {
  std::size_t written = 0;
  std::size_t failed = 0;
};

// Every *.wav under `wav_dir` (recursively, sorted by path) becomes a GTF1
// (T, num_mels) feature file, normalised with voiced-frame statistics, plus a
// (T) VAD mask. The utterance id is the file stem and the speaker id the
// parent directory name. Per-file failures go to `log` and are counted;
// an unreadable `wav_dir` throws kIo.
ExtractReport extract_directory(const std::filesystem::path& wav_dir,
                                const std::filesystem::path& manifest_out,
                                const std::filesystem::path& feat_dir,
                                const frontend::FrontendConfig& config, const LogFn& log);

std::filesystem::path vad_path(const std::filesystem::path& features);

// Voiced frames of an extracted utterance. Falls back to every frame when
// fewer than `min_voiced` are voiced.
Tensor load_voiced_features(const ManifestEntry& entry, std::size_t min_voiced);

struct TrainingSet {
  std::vector<backbone::TrainExample> examples;
  std::vector<std::string> speakers;  // label -> speaker id
};

// Labels follow the sorted speaker ids. Utterances with fewer than
// `min_frames` usable frames are skipped and reported through `log`.
TrainingSet load_training_set(const std::filesystem::path& manifest, std::size_t min_frames,
                              const LogFn& log);

struct TrainOutcome {
  backbone::TrainResult result;
  std::size_t num_params = 0;
  std::size_t num_examples = 0;
  std::size_t num_speakers = 0;
};

// Trains a fresh model and writes <out>/checkpoint and <out>/train.log.
TrainOutcome train_from_manifest(const std::filesystem::path& manifest,
                                 const std::filesystem::path& out, const Options& options,
                                 const LogFn& log);

// Embeds every manifest entry with an eval-mode model.
metrics::EmbeddingTable embed_manifest(backbone::Model& model,
                                       const std::filesystem::path& manifest);

// Central-difference check of one recalibration block on a random
// (channels, freq, time) map, with its parameters moved off their init.
GradcheckReport gradcheck_block(blocks::BlockKind kind, const blocks::GtfcConfig& config,
                                std::size_t channels, std::uint64_t seed, Real step = 1e-5,
                                Real tol = 1e-4);

// Same check through a two-stage backbone with the block inserted, on the
// cross-entropy of a two-sample batch.
GradcheckReport gradcheck_backbone(blocks::BlockKind kind, const blocks::GtfcConfig& config,
                                   std::uint64_t seed, Real step = 1e-5, Real tol = 1e-4);

}  // namespace gtfc::pipeline
