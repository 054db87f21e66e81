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

#include "frontend/synth.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <utility>

#include "frontend/wav.hpp"

namespace gtfc::frontend {

namespace {

constexpr std::size_t kSynthFft = 8192;

std::mutex& plan_mutex() {
  static std::mutex mu;
  return mu;
}

// Inverse real FFT of a fixed size; one instance per utterance.
class InverseFft {
 public:
  InverseFft() {
    spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (kSynthFft / 2 + 1)));
    out_ = static_cast<double*>(fftw_malloc(sizeof(double) * kSynthFft));
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(kSynthFft), spec_, out_, FFTW_ESTIMATE);
  }
  ~InverseFft() {
    {
      std::lock_guard<std::mutex> lock(plan_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(spec_);
    fftw_free(out_);
  }
  InverseFft(const InverseFft&) = delete;
  InverseFft& operator=(const InverseFft&) = delete;

  fftw_complex* spectrum() { return spec_; }
  const double* run() {
    fftw_execute(plan_);
    return out_;
  }

 private:
  fftw_complex* spec_ = nullptr;
  double* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

Real uniform(std::mt19937_64& rng, Real lo, Real hi) {
  return std::uniform_real_distribution<Real>(lo, hi)(rng);
}

Real magnitude(const std::vector<std::array<Real, 3>>& formants, Real pitch, Real hz) {
  if (hz < 60.0) return 0.0;
  Real env = 0.02;
  for (const auto& [center, bw, gain] : formants) {
    const Real z = (hz - center) / bw;
    env += gain * std::exp(-0.5 * z * z);
  }
  const Real d = hz - pitch * std::round(hz / pitch);
  return env * (0.15 + std::exp(-0.5 * (d / 12.0) * (d / 12.0)));
}

void shaped_segment(InverseFft& fft, const std::vector<std::array<Real, 3>>& formants,
                    Real pitch, int sample_rate, std::mt19937_64& rng,
                    std::vector<Real>& out, std::size_t length) {
  std::normal_distribution<Real> n01;
  fftw_complex* spec = fft.spectrum();
  for (std::size_t k = 0; k <= kSynthFft / 2; ++k) {
    const Real m = magnitude(formants, pitch, static_cast<Real>(k) * sample_rate / kSynthFft);
    spec[k][0] = m * n01(rng);
    spec[k][1] = m * n01(rng);
  }
  const double* y = fft.run();
  Real energy = 0.0;
  for (std::size_t i = 0; i < length; ++i) energy += y[i] * y[i];
  const Real rms = std::sqrt(energy / static_cast<Real>(length));
  const Real target = 0.1 * uniform(rng, 0.7, 1.3);
  const std::size_t fade = std::min<std::size_t>(length / 2, sample_rate / 125);
  for (std::size_t i = 0; i < length; ++i) {
    Real g = 1.0;
    if (i < fade) g = static_cast<Real>(i) / fade;
    if (length - 1 - i < fade) g = static_cast<Real>(length - 1 - i) / fade;
    out.push_back(rms > 0 ? g * y[i] * target / rms : 0.0);
  }
}

std::string speaker_name(std::size_t s) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%02zu", s);
  return buf;
}

std::string utt_name(std::size_t s, const char* split, std::size_t u) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "spk%02zu_%s_%03zu", s, split, u);
  return buf;
}

}  // namespace

SpeakerVoice random_voice(std::mt19937_64& rng) {
  SpeakerVoice v;
  v.pitch_hz = uniform(rng, 90.0, 260.0);
  const Real tract = uniform(rng, 0.8, 1.25);
  const std::array<std::pair<Real, Real>, 4> ranges{
      {{250, 900}, {900, 2600}, {2200, 4000}, {4000, 6500}}};
  const std::size_t k = 4;
  v.templates.resize(k);
  for (auto& t : v.templates) {
    for (const auto& [lo, hi] : ranges) {
      t.push_back({tract * uniform(rng, lo, hi), uniform(rng, 60.0, 250.0),
                   uniform(rng, 0.3, 1.0)});
    }
  }
  return v;
}

std::vector<Real> synth_utterance(const SpeakerVoice& voice, std::mt19937_64& rng,
                                  const SynthConfig& config) {
  const int sr = config.sample_rate;
  const auto total = static_cast<std::size_t>(config.duration_s * uniform(rng, 0.9, 1.1) * sr);
  InverseFft fft;
  std::vector<Real> s;
  s.reserve(total + kSynthFft);
  std::uniform_int_distribution<std::size_t> pick(0, voice.templates.size() - 1);
  while (s.size() < total) {
    if (!s.empty() && uniform(rng, 0.0, 1.0) < 0.25) {
      s.resize(s.size() + static_cast<std::size_t>(uniform(rng, 0.05, 0.2) * sr), 0.0);
      continue;
    }
    const auto len = static_cast<std::size_t>(uniform(rng, 0.12, 0.35) * sr);
    const Real pitch = voice.pitch_hz * uniform(rng, 0.97, 1.03);
    shaped_segment(fft, voice.templates[pick(rng)], pitch, sr, rng, s, len);
  }
  s.resize(total);
  std::normal_distribution<Real> floor(0.0, config.noise_floor);
  for (auto& x : s) x = std::clamp(x + floor(rng), -1.0, 1.0);
  return s;
}

SynthSummary write_synthetic_corpus(const std::filesystem::path& out,
                                    const SynthConfig& config) {
  if (config.num_speakers < 2 || config.test_per_speaker < 2) {
    throw Error(ErrorCode::kConfigError, "need at least 2 speakers and 2 test utterances each");
  }
  std::mt19937_64 rng(config.seed);
  SynthSummary summary;
  std::vector<std::vector<std::string>> test_ids(config.num_speakers);
  for (std::size_t s = 0; s < config.num_speakers; ++s) {
    const SpeakerVoice voice = random_voice(rng);
    const std::string spk = speaker_name(s);
    for (std::size_t u = 0; u < config.train_per_speaker; ++u) {
      write_wav(out / "train" / spk / (utt_name(s, "train", u) + ".wav"), config.sample_rate,
                synth_utterance(voice, rng, config));
      ++summary.train_files;
    }
    for (std::size_t u = 0; u < config.test_per_speaker; ++u) {
      const std::string id = utt_name(s, "test", u);
      write_wav(out / "test" / spk / (id + ".wav"), config.sample_rate,
                synth_utterance(voice, rng, config));
      test_ids[s].push_back(id);
      ++summary.test_files;
    }
  }

  const std::size_t n_spk = config.num_speakers, n_utt = config.test_per_speaker;
  const std::size_t max_target = n_spk * n_utt * (n_utt - 1) / 2;
  const std::size_t want_target = std::min(config.num_trials / 2, max_target);
  const std::size_t max_non = n_spk * (n_spk - 1) / 2 * n_utt * n_utt;
  const std::size_t want_non = std::min(config.num_trials - want_target, max_non);
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<std::pair<int, std::pair<std::string, std::string>>> trials;
  std::uniform_int_distribution<std::size_t> spk_dist(0, n_spk - 1), utt_dist(0, n_utt - 1);
  auto add = [&](int label, std::size_t sa, std::size_t ua, std::size_t sb, std::size_t ub) {
    auto key = std::minmax(test_ids[sa][ua], test_ids[sb][ub]);
    if (!seen.insert(key).second) return false;
    trials.push_back({label, {test_ids[sa][ua], test_ids[sb][ub]}});
    return true;
  };
  for (std::size_t n = 0; n < want_target;) {
    const std::size_t s = spk_dist(rng), a = utt_dist(rng), b = utt_dist(rng);
    if (a != b && add(1, s, a, s, b)) ++n;
  }
  for (std::size_t n = 0; n < want_non;) {
    const std::size_t sa = spk_dist(rng), sb = spk_dist(rng);
    if (sa != sb && add(0, sa, utt_dist(rng), sb, utt_dist(rng))) ++n;
  }
  std::shuffle(trials.begin(), trials.end(), rng);
  std::ofstream os(out / "trials.txt", std::ios::trunc);
  for (const auto& [label, pair] : trials) {
    os << label << ' ' << pair.first << ' ' << pair.second << '\n';
  }
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + (out / "trials.txt").string());
  summary.trials = trials.size();
  return summary;
}

}  // namespace gtfc::frontend
