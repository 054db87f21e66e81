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

#include "pipeline/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>

#include "core/parallel.hpp"
#include "core/serialize.hpp"
#include "frontend/wav.hpp"

namespace gtfc::pipeline {

namespace fs = std::filesystem;

// ---- options -------------------------------------------------------------------

const std::vector<std::string>& Options::known_keys() {
  static const std::vector<std::string> keys{
      "seed", "precision",
      // frontend
      "window_ms", "hop_ms", "num_mels", "fft_size", "mel_low_hz", "mel_high_hz",
      "vad_threshold", "vad_mean_scale", "chunk_min", "chunk_max",
      // synthetic corpus
      "speakers", "train_per_speaker", "test_per_speaker", "trials", "duration_s",
      "noise_floor",
      // model and block
      "model_spec", "block", "p", "groups", "gate", "pos", "embedding_dim", "rho_init",
      "tau_init", "attn_hidden", "epsilon", "per_group_we", "se_reduction",
      // training
      "epochs", "batch_size", "lr", "momentum", "weight_decay", "plateau_factor",
      "plateau_patience", "val_fraction",
      // gradcheck
      "channels", "step", "tol"};
  return keys;
}

void Options::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    throw Error(ErrorCode::kConfigError, "unknown option '" + key + "'");
  }
  values_[key] = value;
}

std::string Options::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

namespace {

Real to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const Real r = std::stod(v, &used);
    if (used == v.size()) return r;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kConfigError, key + ": expected a number, got '" + v + "'");
}

std::size_t to_size(const std::string& key, const std::string& v) {
  if (!v.empty() && std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    try {
      return std::stoull(v);
    } catch (const std::exception&) {
    }
  }
  throw Error(ErrorCode::kConfigError, key + ": expected a non-negative integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::kConfigError, key + ": expected a boolean, got '" + v + "'");
}

}  // namespace

std::uint64_t Options::seed() const { return to_size("seed", get("seed", "1")); }

bool Options::f32() const {
  const std::string p = get("precision", "f64");
  if (p != "f32" && p != "f64") throw Error(ErrorCode::kConfigError, "precision must be f32 or f64");
  return p == "f32";
}

frontend::FrontendConfig Options::frontend() const {
  frontend::FrontendConfig c;
  auto real = [&](const char* k, Real& field) {
    if (has(k)) field = to_real(k, get(k, ""));
  };
  auto size = [&](const char* k, std::size_t& field) {
    if (has(k)) field = to_size(k, get(k, ""));
  };
  real("window_ms", c.window_ms);
  real("hop_ms", c.hop_ms);
  size("num_mels", c.num_mels);
  size("fft_size", c.fft_size);
  real("mel_low_hz", c.mel_low_hz);
  real("mel_high_hz", c.mel_high_hz);
  real("vad_threshold", c.vad_threshold);
  real("vad_mean_scale", c.vad_mean_scale);
  size("chunk_min", c.chunk_min);
  size("chunk_max", c.chunk_max);
  return c;
}

frontend::SynthConfig Options::synth() const {
  frontend::SynthConfig c;
  if (has("speakers")) c.num_speakers = to_size("speakers", get("speakers", ""));
  if (has("train_per_speaker")) {
    c.train_per_speaker = to_size("train_per_speaker", get("train_per_speaker", ""));
  }
  if (has("test_per_speaker")) {
    c.test_per_speaker = to_size("test_per_speaker", get("test_per_speaker", ""));
  }
  if (has("trials")) c.num_trials = to_size("trials", get("trials", ""));
  if (has("duration_s")) c.duration_s = to_real("duration_s", get("duration_s", ""));
  if (has("noise_floor")) c.noise_floor = to_real("noise_floor", get("noise_floor", ""));
  c.seed = seed();
  return c;
}

blocks::GtfcConfig Options::block_config() const {
  blocks::GtfcConfig c;
  if (has("p")) c.p = to_real("p", get("p", ""));
  // The desk backbone's first stage is 4 channels wide, so it defaults to 4 groups.
  c.groups = get("model_spec", "desk") == "desk" ? 4 : 8;
  if (has("groups")) c.groups = to_size("groups", get("groups", ""));
  if (has("gate")) c.gate = blocks::parse_gate_op(get("gate", ""));
  if (has("rho_init")) c.rho_init = to_real("rho_init", get("rho_init", ""));
  if (has("tau_init")) c.tau_init = to_real("tau_init", get("tau_init", ""));
  if (has("attn_hidden")) c.attn_hidden = to_size("attn_hidden", get("attn_hidden", ""));
  if (has("epsilon")) c.epsilon = to_real("epsilon", get("epsilon", ""));
  if (has("per_group_we")) c.per_group_we = to_bool("per_group_we", get("per_group_we", ""));
  if (has("se_reduction")) c.se_reduction = to_size("se_reduction", get("se_reduction", ""));
  return c;
}

blocks::BlockKind Options::block_kind() const {
  return blocks::parse_block_kind(get("block", "none"));
}

backbone::ModelSpec Options::model_spec(std::size_t num_speakers) const {
  const std::string name = get("model_spec", "desk");
  backbone::ModelSpec s;
  if (name == "desk") s = backbone::ModelSpec::desk();
  else if (name == "full") s = backbone::ModelSpec::full();
  else throw Error(ErrorCode::kConfigError, "model_spec must be desk or full");
  s.num_speakers = num_speakers;
  s.input_dim = frontend().num_mels;
  if (has("embedding_dim")) s.embedding_dim = to_size("embedding_dim", get("embedding_dim", ""));
  s.insert_kind = block_kind();
  if (has("pos")) s.insert_pos = backbone::parse_insert_pos(get("pos", ""));
  s.block_config = block_config();
  s.validate();
  return s;
}

backbone::TrainConfig Options::train_config() const {
  backbone::TrainConfig c;
  auto real = [&](const char* k, Real& field) {
    if (has(k)) field = to_real(k, get(k, ""));
  };
  auto size = [&](const char* k, std::size_t& field) {
    if (has(k)) field = to_size(k, get(k, ""));
  };
  size("epochs", c.epochs);
  size("batch_size", c.batch_size);
  real("lr", c.lr);
  real("momentum", c.momentum);
  real("weight_decay", c.weight_decay);
  real("plateau_factor", c.plateau_factor);
  size("plateau_patience", c.plateau_patience);
  real("val_fraction", c.val_fraction);
  const auto fe = frontend();
  c.chunk_min = fe.chunk_min;
  c.chunk_max = fe.chunk_max;
  c.f32_params = f32();
  c.seed = seed();
  return c;
}

// ---- manifests ----------------------------------------------------------------

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  for (const auto& e : entries) {
    os << e.utt_id << '\t' << e.speaker_id << '\t' << e.path.generic_string() << '\t'
       << e.num_frames << '\n';
  }
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, '\t');) cols.push_back(c);
    if (cols.size() != 4) {
      throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(n) +
                                          ": expected 4 tab-separated columns");
    }
    ManifestEntry e{cols[0], cols[1], fs::path(cols[2]), 0};
    if (e.path.is_relative()) e.path = base / e.path;
    try {
      e.num_frames = std::stoull(cols[3]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(n) + ": bad frame count");
    }
    out.push_back(std::move(e));
  }
  return out;
}

fs::path vad_path(const fs::path& features) {
  fs::path p = features;
  p.replace_extension(".vad.gtf");
  return p;
}

// ---- extraction ---------------------------------------------------------------

ExtractReport extract_directory(const fs::path& wav_dir, const fs::path& manifest_out,
                                const fs::path& feat_dir, const frontend::FrontendConfig& config,
                                const LogFn& log) {
  std::error_code ec;
  if (!fs::is_directory(wav_dir, ec)) {
    throw Error(ErrorCode::kIo, "cannot read directory " + wav_dir.string());
  }
  std::vector<fs::path> files;
  fs::recursive_directory_iterator it(wav_dir, ec), end;
  if (ec) throw Error(ErrorCode::kIo, "cannot read directory " + wav_dir.string() + ": " + ec.message());
  for (; it != end; it.increment(ec)) {
    if (ec) throw Error(ErrorCode::kIo, "cannot list " + wav_dir.string() + ": " + ec.message());
    if (it->is_regular_file() && it->path().extension() == ".wav") files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());
  fs::create_directories(feat_dir);
  const fs::path manifest_base =
      fs::absolute(manifest_out).parent_path().lexically_normal();

  // Duplicate stems would overwrite each other's features.
  std::map<std::string, std::size_t> stem_count;
  for (const auto& f : files) ++stem_count[f.stem().string()];

  std::vector<ManifestEntry> entries(files.size());
  std::vector<std::string> errors(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    const fs::path& f = files[i];
    const std::string id = f.stem().string();
    try {
      if (stem_count.at(id) > 1) throw Error(ErrorCode::kFormat, "utterance id '" + id + "' is not unique");
      auto wav = frontend::read_wav(f);
      const auto rec = frontend::analyze(std::move(wav.samples), wav.sample_rate, config);
      const Tensor feats = frontend::mvn(rec.features, rec.vad_mask);
      std::vector<Real> mask(rec.vad_mask.size());
      for (std::size_t t = 0; t < mask.size(); ++t) mask[t] = rec.vad_mask[t] ? 1.0 : 0.0;
      const fs::path out = feat_dir / (id + ".gtf");
      write_gtf1(feats, out);
      const std::size_t frames = mask.size();
      write_gtf1(Tensor::from({frames}, std::move(mask)), vad_path(out));
      const fs::path abs_out = fs::absolute(out).lexically_normal();
      entries[i] = {id, f.parent_path().filename().string(),
                    abs_out.lexically_relative(manifest_base), feats.dim(0)};
    } catch (const std::exception& e) {
      errors[i] = f.string() + ": " + e.what();
    }
  });

  ExtractReport report;
  std::vector<ManifestEntry> good;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (errors[i].empty()) {
      good.push_back(entries[i]);
      ++report.written;
    } else {
      ++report.failed;
      if (log) log(errors[i]);
    }
  }
  write_manifest(manifest_out, good);
  return report;
}

Tensor load_voiced_features(const ManifestEntry& entry, std::size_t min_voiced) {
  const Tensor feats = read_gtf1(entry.path);
  if (feats.rank() != 2) throw Error(ErrorCode::kFormat, entry.path.string() + " is not (T, F)");
  const fs::path mask_file = vad_path(entry.path);
  if (!fs::exists(mask_file)) return feats;
  const Tensor m = read_gtf1(mask_file);
  if (m.numel() != feats.dim(0)) {
    throw Error(ErrorCode::kFormat, mask_file.string() + " does not match its features");
  }
  std::vector<bool> mask(m.numel());
  std::size_t voiced = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) voiced += (mask[t] = m[t] != 0.0);
  if (voiced < min_voiced) return feats;
  return frontend::voiced_frames(feats, mask);
}

// ---- training ------------------------------------------------------------------

TrainingSet load_training_set(const fs::path& manifest, std::size_t min_frames, const LogFn& log) {
  const auto entries = read_manifest(manifest);
  std::set<std::string> speaker_set;
  for (const auto& e : entries) speaker_set.insert(e.speaker_id);
  TrainingSet set;
  set.speakers.assign(speaker_set.begin(), speaker_set.end());
  std::map<std::string, std::size_t> label;
  for (std::size_t i = 0; i < set.speakers.size(); ++i) label[set.speakers[i]] = i;
  for (const auto& e : entries) {
    Tensor f = load_voiced_features(e, min_frames);
    if (f.dim(0) < min_frames) {
      if (log) log(e.utt_id + ": " + std::to_string(f.dim(0)) + " frames, skipped");
      continue;
    }
    set.examples.push_back({e.utt_id, std::move(f), label[e.speaker_id]});
  }
  return set;
}

TrainOutcome train_from_manifest(const fs::path& manifest, const fs::path& out,
                                 const Options& options, const LogFn& log) {
  // Validate the layout before reading any features.
  backbone::ModelSpec spec = options.model_spec(2);
  TrainingSet set = load_training_set(manifest, spec.min_frames(), log);
  if (set.speakers.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "training needs at least two speakers");
  }
  spec.num_speakers = set.speakers.size();
  backbone::Model model(spec, options.seed());
  fs::create_directories(out);
  std::ofstream train_log(out / "train.log", std::ios::trunc);
  TrainOutcome outcome;
  outcome.result = backbone::train(model, set.examples, options.train_config(), &train_log);
  if (!train_log) throw Error(ErrorCode::kIo, "cannot write " + (out / "train.log").string());
  if (options.f32()) backbone::round_params_to_f32(model);
  model.save(out / "checkpoint");
  std::ofstream spk(out / "checkpoint" / "speakers.txt", std::ios::trunc);
  for (const auto& s : set.speakers) spk << s << '\n';
  outcome.num_params = model.num_params();
  outcome.num_examples = set.examples.size();
  outcome.num_speakers = set.speakers.size();
  return outcome;
}

metrics::EmbeddingTable embed_manifest(backbone::Model& model, const fs::path& manifest) {
  const auto entries = read_manifest(manifest);
  const std::size_t min_frames = model.spec().min_frames();
  metrics::EmbeddingTable table;
  for (const auto& e : entries) {
    if (!table.emplace(e.utt_id, std::vector<Real>{}).second) {
      throw Error(ErrorCode::kFormat, "utterance id '" + e.utt_id + "' appears twice");
    }
  }
  // Eval-mode forwards only read the model, so utterances run concurrently.
  // The lowest-index failure is rethrown, independent of scheduling.
  std::vector<std::exception_ptr> errors(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    try {
      table.at(entries[i].utt_id) = model.embed(load_voiced_features(entries[i], min_frames));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return table;
}

// ---- gradient checks -------------------------------------------------------------

namespace {

void perturb(const Tensor& t, std::mt19937_64& rng, Real stddev) {
  std::normal_distribution<Real> g(0.0, stddev);
  for (auto& v : Tensor(t).mutable_data()) v = g(rng);
}

}  // namespace

GradcheckReport gradcheck_block(blocks::BlockKind kind, const blocks::GtfcConfig& config,
                                std::size_t channels, std::uint64_t seed, Real step, Real tol) {
  std::mt19937_64 rng(seed);
  blocks::Block block(kind, channels, config, rng);
  for (auto& p : block.params()) {
    if (p.name == "gamma" || p.name == "beta" || p.name == "rho" || p.name == "lambda" ||
        p.name == "b_alpha") {
      perturb(p.tensor, rng, 0.5);
    }
  }
  Tensor x = Tensor::randn({channels, 3, 4}, rng, 1.0, true);
  const Tensor w = Tensor::randn({channels, 3, 4}, rng);
  std::vector<GradcheckLeaf> leaves{{"x", x}};
  for (auto& p : block.params()) leaves.push_back({p.name, p.tensor});
  return gradcheck([&] { return sum(block.forward(x) * w); }, leaves, step, tol);
}

GradcheckReport gradcheck_backbone(blocks::BlockKind kind, const blocks::GtfcConfig& config,
                                   std::uint64_t seed, Real step, Real tol) {
  backbone::ModelSpec s;
  s.stage_channels = {4, 8};
  s.blocks_per_stage = {1, 1};
  s.input_dim = 8;
  s.embedding_dim = 4;
  s.num_speakers = 3;
  s.insert_kind = kind;
  s.block_config = config;
  backbone::Model m(s, seed);
  std::mt19937_64 rng(seed + 1);
  std::vector<GradcheckLeaf> leaves;
  for (const auto& p : m.params()) {
    const bool recal = p.name.find("recal") != std::string::npos;
    if (recal && (p.name.find("gamma") != std::string::npos ||
                  p.name.find("rho") != std::string::npos)) {
      perturb(p.tensor, rng, 0.5);
    }
    if (p.name.rfind("classifier.w", 0) == 0) perturb(p.tensor, rng, 0.3);
    leaves.push_back({p.name, p.tensor});
  }
  const Tensor x = Tensor::randn({2, 1, 8, 12}, rng);
  const std::vector<std::size_t> labels{0, 2};
  return gradcheck(
      [&] { return backbone::cross_entropy(m.logits(m.forward(x, backbone::Mode::kTrain)), labels); },
      leaves, step, tol);
}

}  // namespace gtfc::pipeline
