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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace gtfc::metrics {

enum class Label { kNontarget, kTarget, kUnknown };

struct Trial {
  std::string enroll;
  std::string test;
  Label label = Label::kUnknown;
};

struct ScoredTrial {
  std::string enroll;
  std::string test;
  Label label = Label::kUnknown;
  Real score = 0.0;
};

using TrialScoreSet = std::vector<ScoredTrial>;

// `label enroll test` lines, label 1 (target) or 0 (nontarget).
std::vector<Trial> read_trials(const std::filesystem::path& path);
// `enroll test score` lines; labels come back unknown.
TrialScoreSet read_scores(const std::filesystem::path& path);
// Scores are printed with enough digits to round-trip exactly.
void write_scores(const std::filesystem::path& path, const TrialScoreSet& scores);

// Attaches trial labels to scores. Every trial needs a score; missing pairs
// raise kTrialMismatch naming the first few.
TrialScoreSet attach_labels(const TrialScoreSet& scores, const std::vector<Trial>& trials);

// Throws kZeroVector when either side has zero norm.
Real cosine_score(std::span<const Real> a, std::span<const Real> b);

// Utterance embeddings keyed by id: one `id v0 v1 ...` line each.
using EmbeddingTable = std::map<std::string, std::vector<Real>>;
void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable read_embeddings(const std::filesystem::path& path);

// Cosine scores in trial order. Throws kMissingUtterance listing every
// absent id.
TrialScoreSet score_trials(const EmbeddingTable& table, const std::vector<Trial>& trials);

struct EerResult {
  Real eer = 0.0;        // fraction in [0, 1]
  Real threshold = 0.0;
};

// Thresholds sweep the distinct scores plus +inf, accepting score >= t.
// Between the last sweep point with FAR > FRR and the first with FAR <= FRR
// the rates are interpolated linearly. Needs at least one target and one
// nontarget (kDegenerateSet) and finite scores.
EerResult eer(const TrialScoreSet& scores);
EerResult eer(std::span<const Real> target_scores, std::span<const Real> nontarget_scores);

// Normalised minimum detection cost over the distinct scores and +-inf.
Real min_dcf(const TrialScoreSet& scores, Real p_target = 0.01, Real c_miss = 1.0,
             Real c_fa = 1.0);
Real min_dcf(std::span<const Real> target_scores, std::span<const Real> nontarget_scores,
             Real p_target = 0.01, Real c_miss = 1.0, Real c_fa = 1.0);

// w_a * a + w_b * b per trial, in the order of `a`. Keys and labels must
// agree (kTrialMismatch).
TrialScoreSet fuse(const TrialScoreSet& a, const TrialScoreSet& b, Real w_a = 0.5,
                   Real w_b = 0.5);

}  // namespace gtfc::metrics
