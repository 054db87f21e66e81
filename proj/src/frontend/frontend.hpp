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

#include <cstdint>
#include <span>
#include <vector>

#include "core/tensor.hpp"

namespace gtfc::frontend {

/// Log-mel frontend settings. Zero `fft_size` picks the smallest power of two
/// covering the window; zero `mel_high_hz` means the Nyquist frequency.
struct FrontendConfig {
  Real window_ms = 25.0;
  Real hop_ms = 10.0;
  std::size_t num_mels = 64;
  std::size_t fft_size = 0;
  Real mel_low_hz = 20.0;
  Real mel_high_hz = 0.0;
  Real vad_threshold = 5.5;
  Real vad_mean_scale = 0.5;
  std::size_t chunk_min = 300;
  std::size_t chunk_max = 800;

  std::size_t window_length(int sample_rate) const;
  std::size_t hop_length(int sample_rate) const;
  std::size_t fft_length(int sample_rate) const;
  Real mel_high(int sample_rate) const;
  // Throws kConfigError when a field is inconsistent with the sample rate.
  void validate(int sample_rate) const;
};

inline constexpr Real kLogFloor = 1e-10;

/// Number of whole windows in a signal; trailing samples are dropped.
std::size_t num_frames(std::size_t num_samples, std::size_t window, std::size_t hop);

std::vector<Real> hamming_window(std::size_t length);

Real hz_to_mel(Real hz);  // HTK: 2595 log10(1 + f/700)
Real mel_to_hz(Real mel);

/// (num_mels, fft/2 + 1) triangular weights, equally spaced on the mel
/// scale, unit peak.
Tensor mel_filterbank(int sample_rate, const FrontendConfig& config);

/// Raw (unwindowed) frames, shape (T, window_len). Throws kEmptySignal when
/// the signal is shorter than one window.
Tensor frame_signal(std::span<const Real> samples, int sample_rate,
                    const FrontendConfig& config);

/// Frames multiplied by the Hamming window, shape (T, window_len).
Tensor frame_and_window(std::span<const Real> samples, int sample_rate,
                        const FrontendConfig& config);

/// Windowed frames -> (T, num_mels) log mel energies.
Tensor logmel(const Tensor& windowed_frames, int sample_rate,
              const FrontendConfig& config);

/// Per-frame log energy of raw frames, computed on the 16-bit PCM scale.
std::vector<Real> frame_log_energy(const Tensor& raw_frames);

/// Voiced iff log_energy > threshold + mean_scale * mean(log_energy).
std::vector<bool> energy_vad(const Tensor& raw_frames, const FrontendConfig& config);

/// Per-dimension mean/variance normalisation. Statistics come from voiced
/// frames (all frames when fewer than two are voiced) and are applied to
/// every frame.
Tensor mvn(const Tensor& features, const std::vector<bool>& vad_mask = {});

/// Keeps only the rows flagged in the mask.
Tensor voiced_frames(const Tensor& features, const std::vector<bool>& vad_mask);

struct Chunk {
  std::size_t start = 0;
  std::size_t length = 0;
  bool short_utterance = false;
  Tensor features;
};

/// Random training chunk of length in [chunk_min, min(chunk_max, T)].
/// Utterances shorter than chunk_min come back whole, flagged short.
Chunk sample_chunk(const Tensor& features, std::uint64_t seed,
                   const FrontendConfig& config);

struct UtteranceRecord {
  int sample_rate = 0;
  std::vector<Real> samples;
  Tensor features;  // (T, num_mels), before normalisation
  std::vector<bool> vad_mask;
};

/// Frames, log-mel and VAD for one decoded signal.
UtteranceRecord analyze(std::vector<Real> samples, int sample_rate,
                        const FrontendConfig& config);

}  // namespace gtfc::frontend
