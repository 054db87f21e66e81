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
#include <vector>

#include "core/tensor.hpp"

namespace gtfc::frontend {

struct WavData {
  int sample_rate = 0;
  std::vector<Real> samples;  // scaled to [-1, 1)
};

// Canonical RIFF/WAVE with 16-bit PCM, one channel. Anything else (stereo,
// float, 8/24-bit, truncated chunks) is a kFormat error.
WavData read_wav(const std::filesystem::path& path);
WavData decode_wav(const std::vector<std::uint8_t>& bytes);

// Samples are scaled by 32768, rounded and clipped to the 16-bit range.
void write_wav(const std::filesystem::path& path, int sample_rate,
               const std::vector<Real>& samples);
std::vector<std::uint8_t> encode_wav(int sample_rate, const std::vector<Real>& samples);

}  // namespace gtfc::frontend
