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

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "core/tensor.hpp"

namespace gtfc::frontend {

// Toy speaker corpus. A speaker owns a handful of spectral envelopes (formant
// sets over a harmonic comb at the speaker's pitch); an utterance strings
// together noise segments shaped by randomly chosen envelopes, separated by
// short pauses, over a constant noise floor.
struct SynthConfig {
  std::size_t num_speakers = 8;
  std::size_t train_per_speaker = 40;
  std::size_t test_per_speaker = 10;
  std::size_t num_trials = 400;  // half target, half nontarget
  std::size_t templates_per_speaker = 4;
  int sample_rate = 16000;
  Real duration_s = 3.6;
  Real noise_floor = 0.003;
  std::uint64_t seed = 1;
};

struct SpeakerVoice {
  Real pitch_hz = 0.0;
  // templates[k] = formant (center Hz, bandwidth Hz, gain) triples
  std::vector<std::vector<std::array<Real, 3>>> templates;
};

SpeakerVoice random_voice(std::mt19937_64& rng);

std::vector<Real> synth_utterance(const SpeakerVoice& voice, std::mt19937_64& rng,
                                  const SynthConfig& config);

struct SynthSummary {
  std::size_t train_files = 0;
  std::size_t test_files = 0;
  std::size_t trials = 0;
};

// Writes <out>/train/<spk>/<utt>.wav, <out>/test/<spk>/<utt>.wav and
// <out>/trials.txt (`label enroll test`) over the test utterances.
SynthSummary write_synthetic_corpus(const std::filesystem::path& out,
                                    const SynthConfig& config);

}  // namespace gtfc::frontend
