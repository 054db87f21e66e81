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

#include "frontend/frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

namespace gtfc::frontend {

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  // Zero-pads `frame` to n and writes |X_k|^2 for k = 0..n/2.
  void power_spectrum(std::span<const Real> frame, std::vector<Real>& power) {
    std::fill(in_, in_ + n_, 0.0);
    std::copy(frame.begin(), frame.end(), in_);
    fftw_execute(plan_);
    power.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k < power.size(); ++k) {
      power[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }
  }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

std::size_t FrontendConfig::window_length(int sample_rate) const {
  return static_cast<std::size_t>(std::lround(sample_rate * window_ms / 1000.0));
}

std::size_t FrontendConfig::hop_length(int sample_rate) const {
  return static_cast<std::size_t>(std::lround(sample_rate * hop_ms / 1000.0));
}

std::size_t FrontendConfig::fft_length(int sample_rate) const {
  if (fft_size) return fft_size;
  std::size_t n = 1;
  while (n < window_length(sample_rate)) n <<= 1;
  return n;
}

Real FrontendConfig::mel_high(int sample_rate) const {
  return mel_high_hz > 0 ? mel_high_hz : sample_rate / 2.0;
}

void FrontendConfig::validate(int sample_rate) const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kConfigError, why); };
  if (sample_rate <= 0) fail("sample rate must be positive");
  if (window_length(sample_rate) == 0 || hop_length(sample_rate) == 0) {
    fail("window and hop must span at least one sample");
  }
  const std::size_t n = fft_length(sample_rate);
  if (n < window_length(sample_rate) || (n & (n - 1)) != 0) {
    fail("fft_size must be a power of two no shorter than the window");
  }
  if (num_mels == 0) fail("num_mels must be positive");
  if (!(mel_low_hz >= 0) || !(mel_low_hz < mel_high(sample_rate)) ||
      mel_high(sample_rate) > sample_rate / 2.0) {
    fail("mel range must satisfy 0 <= low < high <= sample_rate/2");
  }
  if (chunk_min == 0 || chunk_min > chunk_max) fail("need 0 < chunk_min <= chunk_max");
}

std::size_t num_frames(std::size_t num_samples, std::size_t window, std::size_t hop) {
  if (num_samples < window) return 0;
  return 1 + (num_samples - window) / hop;
}

std::vector<Real> hamming_window(std::size_t length) {
  std::vector<Real> w(length, 1.0);
  if (length < 2) return w;
  const Real denom = static_cast<Real>(length - 1);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / denom);
  }
  return w;
}

Real hz_to_mel(Real hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

Real mel_to_hz(Real mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Tensor mel_filterbank(int sample_rate, const FrontendConfig& config) {
  config.validate(sample_rate);
  const std::size_t n_fft = config.fft_length(sample_rate);
  const std::size_t n_bins = n_fft / 2 + 1;
  const std::size_t m = config.num_mels;
  const Real lo = hz_to_mel(config.mel_low_hz);
  const Real hi = hz_to_mel(config.mel_high(sample_rate));
  std::vector<Real> edges(m + 2);
  for (std::size_t j = 0; j < edges.size(); ++j) {
    edges[j] = lo + (hi - lo) * static_cast<Real>(j) / static_cast<Real>(m + 1);
  }
  std::vector<Real> w(m * n_bins, 0.0);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const Real mel = hz_to_mel(static_cast<Real>(k) * sample_rate / n_fft);
    for (std::size_t j = 0; j < m; ++j) {
      const Real left = edges[j], center = edges[j + 1], right = edges[j + 2];
      Real v = 0.0;
      if (mel > left && mel <= center) {
        v = (mel - left) / (center - left);
      } else if (mel > center && mel < right) {
        v = (right - mel) / (right - center);
      }
      w[j * n_bins + k] = v;
    }
  }
  return Tensor::from({m, n_bins}, std::move(w));
}

Tensor frame_signal(std::span<const Real> samples, int sample_rate,
                    const FrontendConfig& config) {
  config.validate(sample_rate);
  const std::size_t win = config.window_length(sample_rate);
  const std::size_t hop = config.hop_length(sample_rate);
  const std::size_t t = num_frames(samples.size(), win, hop);
  if (t == 0) {
    throw Error(ErrorCode::kEmptySignal, std::to_string(samples.size()) +
                                             " samples do not fill one " +
                                             std::to_string(win) + "-sample window");
  }
  std::vector<Real> out(t * win);
  for (std::size_t f = 0; f < t; ++f) {
    std::copy_n(samples.begin() + f * hop, win, out.begin() + f * win);
  }
  return Tensor::from({t, win}, std::move(out));
}

Tensor frame_and_window(std::span<const Real> samples, int sample_rate,
                        const FrontendConfig& config) {
  const Tensor raw = frame_signal(samples, sample_rate, config);
  const std::size_t win = raw.dim(1);
  const auto w = hamming_window(win);
  std::vector<Real> out(raw.data().begin(), raw.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= w[i % win];
  return Tensor::from(raw.shape(), std::move(out));
}

Tensor logmel(const Tensor& frames, int sample_rate, const FrontendConfig& config) {
  config.validate(sample_rate);
  if (frames.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "frames must be (T, window)");
  }
  const std::size_t n_fft = config.fft_length(sample_rate);
  if (frames.dim(1) > n_fft) {
    throw Error(ErrorCode::kConfigError, "fft_size shorter than the frame length");
  }
  const Tensor bank = mel_filterbank(sample_rate, config);
  const std::size_t m = bank.dim(0), n_bins = bank.dim(1);
  const std::size_t t = frames.dim(0), win = frames.dim(1);
  RealFft fft(n_fft);
  std::vector<Real> power;
  std::vector<Real> out(t * m);
  auto fv = frames.data();
  auto bv = bank.data();
  for (std::size_t f = 0; f < t; ++f) {
    fft.power_spectrum(fv.subspan(f * win, win), power);
    for (std::size_t j = 0; j < m; ++j) {
      Real e = 0.0;
      const Real* row = bv.data() + j * n_bins;
      for (std::size_t k = 0; k < n_bins; ++k) e += row[k] * power[k];
      out[f * m + j] = std::log(e + kLogFloor);
    }
  }
  return Tensor::from({t, m}, std::move(out));
}

std::vector<Real> frame_log_energy(const Tensor& raw_frames) {
  if (raw_frames.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "frames must be (T, window)");
  }
  const std::size_t t = raw_frames.dim(0), win = raw_frames.dim(1);
  if (t == 0) throw Error(ErrorCode::kEmptySignal, "no frames");
  auto v = raw_frames.data();
  std::vector<Real> out(t);
  for (std::size_t f = 0; f < t; ++f) {
    Real e = 0.0;
    for (std::size_t i = 0; i < win; ++i) {
      const Real s = v[f * win + i] * 32768.0;
      e += s * s;
    }
    out[f] = std::log(std::max(e, kLogFloor));
  }
  return out;
}

std::vector<bool> energy_vad(const Tensor& raw_frames, const FrontendConfig& config) {
  const auto energy = frame_log_energy(raw_frames);
  Real mean = 0.0;
  for (Real e : energy) mean += e;
  mean /= static_cast<Real>(energy.size());
  const Real threshold = config.vad_threshold + config.vad_mean_scale * mean;
  std::vector<bool> mask(energy.size());
  for (std::size_t i = 0; i < energy.size(); ++i) mask[i] = energy[i] > threshold;
  return mask;
}

Tensor mvn(const Tensor& features, const std::vector<bool>& vad_mask) {
  if (features.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "features must be (T, D)");
  }
  const std::size_t t = features.dim(0), d = features.dim(1);
  if (t < 2) throw Error(ErrorCode::kTooFewFrames, "mvn needs at least 2 frames");
  if (!vad_mask.empty() && vad_mask.size() != t) {
    throw Error(ErrorCode::kShapeMismatch, "VAD mask length differs from frame count");
  }
  std::size_t voiced = 0;
  for (bool b : vad_mask) voiced += b;
  const bool use_mask = voiced >= 2;
  const Real count = static_cast<Real>(use_mask ? voiced : t);
  auto v = features.data();
  std::vector<Real> mu(d, 0.0), var(d, 0.0);
  for (std::size_t f = 0; f < t; ++f) {
    if (use_mask && !vad_mask[f]) continue;
    for (std::size_t j = 0; j < d; ++j) mu[j] += v[f * d + j];
  }
  for (auto& x : mu) x /= count;
  for (std::size_t f = 0; f < t; ++f) {
    if (use_mask && !vad_mask[f]) continue;
    for (std::size_t j = 0; j < d; ++j) {
      const Real c = v[f * d + j] - mu[j];
      var[j] += c * c;
    }
  }
  std::vector<Real> out(t * d);
  for (std::size_t j = 0; j < d; ++j) {
    const Real denom = std::sqrt(var[j] / count) + kLogFloor;
    for (std::size_t f = 0; f < t; ++f) out[f * d + j] = (v[f * d + j] - mu[j]) / denom;
  }
  return Tensor::from({t, d}, std::move(out));
}

Tensor voiced_frames(const Tensor& features, const std::vector<bool>& vad_mask) {
  if (features.rank() != 2 || vad_mask.size() != features.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch, "VAD mask length differs from frame count");
  }
  const std::size_t d = features.dim(1);
  auto v = features.data();
  std::vector<Real> out;
  std::size_t kept = 0;
  for (std::size_t f = 0; f < vad_mask.size(); ++f) {
    if (!vad_mask[f]) continue;
    out.insert(out.end(), v.begin() + f * d, v.begin() + (f + 1) * d);
    ++kept;
  }
  return Tensor::from({kept, d}, std::move(out));
}

Chunk sample_chunk(const Tensor& features, std::uint64_t seed,
                   const FrontendConfig& config) {
  if (features.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "features must be (T, D)");
  }
  const std::size_t t = features.dim(0);
  Chunk c;
  if (t < config.chunk_min) {
    c.length = t;
    c.short_utterance = true;
    c.features = features;
    return c;
  }
  std::mt19937_64 rng(seed);
  const std::size_t hi = std::min(config.chunk_max, t);
  c.length = std::uniform_int_distribution<std::size_t>(config.chunk_min, hi)(rng);
  c.start = std::uniform_int_distribution<std::size_t>(0, t - c.length)(rng);
  c.features = narrow(features, 0, c.start, c.length);
  return c;
}

UtteranceRecord analyze(std::vector<Real> samples, int sample_rate,
                        const FrontendConfig& config) {
  UtteranceRecord rec;
  rec.sample_rate = sample_rate;
  const Tensor raw = frame_signal(samples, sample_rate, config);
  const Tensor windowed = frame_and_window(samples, sample_rate, config);
  rec.features = logmel(windowed, sample_rate, config);
  rec.vad_mask = energy_vad(raw, config);
  rec.samples = std::move(samples);
  return rec;
}

}  // namespace gtfc::frontend
