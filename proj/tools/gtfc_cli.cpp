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

// gtfc: command-line driver over the C library.
//
// Exit codes:
//   0  success
//   1  failure not listed below (including any file failing in extract)
//   2  extract could not read the WAV directory
//   3  training hit a non-finite loss
//   4  group count does not divide a channel count
//   5  trials and embeddings or score files do not match
//   6  gradient check failed
//   64 bad command line or config file
//
// Results go to stdout, diagnostics to stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <list>
#include <memory>
#include <string>
#include <vector>

#include "gtfc/gtfc.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUnreadableDir = 2;
constexpr int kExitNonFinite = 3;
constexpr int kExitGroups = 4;
constexpr int kExitMismatch = 5;
constexpr int kExitGradcheck = 6;
constexpr int kExitUsage = 64;

struct UsageError {
  std::string message;
};

int exit_code_for(gtfc_status s) {
  switch (s) {
    case GTFC_OK: return 0;
    case GTFC_ERR_NON_FINITE_LOSS: return kExitNonFinite;
    case GTFC_ERR_GROUP_MISMATCH: return kExitGroups;
    case GTFC_ERR_MISSING_UTTERANCE:
    case GTFC_ERR_TRIAL_MISMATCH:
      return kExitMismatch;
    default: return kExitFailure;
  }
}

// Prints the library's message and maps the status to an exit code.
int report(gtfc_status s, const char* what) {
  if (s == GTFC_OK) return 0;
  std::cerr << "gtfc " << what << ": " << gtfc_last_error() << '\n';
  return exit_code_for(s);
}

void log_to_stderr(const char* message, void*) { std::cerr << message << '\n'; }

using OptionsPtr = std::unique_ptr<gtfc_options, decltype(&gtfc_options_free)>;
using ScoresPtr = std::unique_ptr<gtfc_scores, decltype(&gtfc_scores_free)>;
using ModelPtr = std::unique_ptr<gtfc_model, decltype(&gtfc_model_free)>;

// Flags that map one-to-one onto library option keys. Values stay strings;
// the library parses and validates them.
class Settings {
 public:
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key,
                   const std::string& help) {
    auto& slot = slots_.emplace_back();
    slot.key = key;
    slot.option = app->add_option(flag, slot.value, help);
    return slot.option;
  }

  // Config file first, then --set pairs, then dedicated flags.
  OptionsPtr build(const std::string& config_path,
                   const std::vector<std::string>& overrides) const {
    gtfc_options* raw = nullptr;
    if (gtfc_options_create(&raw) != GTFC_OK) throw UsageError{gtfc_last_error()};
    OptionsPtr opts(raw, gtfc_options_free);
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw UsageError{"cannot read config " + config_path};
      std::string line;
      for (int n = 1; std::getline(is, line); ++n) {
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#' || line[first] == ';' ||
            line[first] == '[') {
          continue;
        }
        set(opts.get(), line, config_path + ":" + std::to_string(n));
      }
    }
    for (const auto& kv : overrides) set(opts.get(), kv, "--set " + kv);
    for (const auto& slot : slots_) {
      if (slot.option->count() > 0) put(opts.get(), slot.key, slot.value);
    }
    return opts;
  }

 private:
  struct Slot {
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
  };

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static void set(gtfc_options* o, const std::string& kv, const std::string& where) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError{where + ": expected key=value"};
    put(o, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  static void put(gtfc_options* o, const std::string& key, const std::string& value) {
    if (gtfc_options_set(o, key.c_str(), value.c_str()) != GTFC_OK) {
      throw UsageError{gtfc_last_error()};
    }
  }

  std::list<Slot> slots_;  // stable addresses for CLI11's bindings
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GTFC speaker-embedding toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Settings settings;
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key=value file applied before flags");
  app.add_option("--set", overrides, "extra key=value settings")->take_all();
  settings.add(&app, "--seed", "seed", "random seed");
  settings.add(&app, "--precision", "precision", "f32 or f64 parameter storage")
      ->check(CLI::IsMember({"f32", "f64"}));

  // extract
  auto* extract = app.add_subcommand("extract", "log-mel features for a WAV directory");
  std::string wav_dir, manifest_out, feat_dir;
  extract->add_option("--wav-dir", wav_dir, "directory scanned for *.wav")->required();
  extract->add_option("--manifest-out", manifest_out, "manifest to write")->required();
  extract->add_option("--feat-dir", feat_dir, "feature output directory")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic multi-speaker corpus");
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();
  settings.add(synth, "--speakers", "speakers", "number of speakers");
  settings.add(synth, "--train-per-speaker", "train_per_speaker", "training utterances each");
  settings.add(synth, "--test-per-speaker", "test_per_speaker", "test utterances each");
  settings.add(synth, "--trials", "trials", "number of trials");

  // train
  auto* train = app.add_subcommand("train", "train a speaker-embedding model");
  std::string train_manifest, train_out;
  train->add_option("--manifest", train_manifest, "training manifest")->required();
  train->add_option("--out", train_out, "output directory")->required();
  settings.add(train, "--model-spec", "model_spec", "desk or full");
  settings.add(train, "--block", "block", "none, se, c-gtfc or tf-gtfc");
  settings.add(train, "--p", "p", "pooling norm");
  settings.add(train, "--groups", "groups", "tf-gtfc groups");
  settings.add(train, "--gate", "gate", "sigmoid, one_plus_elu or one_plus_tanh");
  settings.add(train, "--pos", "pos", "after_bn, before_bn or before_conv");
  settings.add(train, "--epochs", "epochs", "training epochs");
  settings.add(train, "--batch-size", "batch_size", "batch size");
  settings.add(train, "--lr", "lr", "learning rate");

  // embed
  auto* embed = app.add_subcommand("embed", "embed every utterance in a manifest");
  std::string ckpt, embed_manifest, embed_out;
  embed->add_option("--ckpt", ckpt, "checkpoint or training output directory")->required();
  embed->add_option("--manifest", embed_manifest, "feature manifest")->required();
  embed->add_option("--out", embed_out, "embedding file to write")->required();

  // score
  auto* score = app.add_subcommand("score", "cosine-score a trial list");
  std::string embeds, score_trials, score_out;
  score->add_option("--embeds", embeds, "embedding file")->required();
  score->add_option("--trials", score_trials, "trial list")->required();
  score->add_option("--out", score_out, "score file to write")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "EER and minDCF of a score file");
  std::string eval_scores, eval_trials;
  double p_target = 0.01;
  eval->add_option("--scores", eval_scores, "score file")->required();
  eval->add_option("--trials", eval_trials, "trial list")->required();
  eval->add_option("--p-target", p_target, "target prior for minDCF")->capture_default_str();

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of a block");
  std::string grad_block;
  bool grad_backbone = false;
  grad->add_option("--block", grad_block, "se, c-gtfc or tf-gtfc")->required();
  grad->add_flag("--backbone", grad_backbone, "check a two-stage backbone with the block");
  settings.add(grad, "--p", "p", "pooling norm");
  settings.add(grad, "--groups", "groups", "tf-gtfc groups");
  settings.add(grad, "--gate", "gate", "gate operator");
  settings.add(grad, "--channels", "channels", "channel count");

  // fuse
  auto* fuse = app.add_subcommand("fuse", "equal-weight linear score fusion");
  std::string scores_a, scores_b, fuse_out;
  double weight_a = 0.5;
  fuse->add_option("--scores-a", scores_a, "first score file")->required();
  fuse->add_option("--scores-b", scores_b, "second score file")->required();
  fuse->add_option("--out", fuse_out, "fused score file")->required();
  fuse->add_option("--weight-a", weight_a, "weight of the first system; the second gets 1 - w")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  OptionsPtr opts(nullptr, gtfc_options_free);
  try {
    opts = settings.build(config_path, overrides);
  } catch (const UsageError& e) {
    std::cerr << "gtfc: " << e.message << '\n';
    return kExitUsage;
  }

  if (extract->parsed()) {
    std::size_t written = 0, failed = 0;
    const gtfc_status s = gtfc_extract(wav_dir.c_str(), manifest_out.c_str(), feat_dir.c_str(),
                                       opts.get(), log_to_stderr, nullptr, &written, &failed);
    if (s == GTFC_ERR_IO && written == 0 && failed == 0) {
      std::cerr << "gtfc extract: " << gtfc_last_error() << '\n';
      return kExitUnreadableDir;
    }
    if (s != GTFC_OK) return report(s, "extract");
    std::cout << "written=" << written << " failed=" << failed << '\n';
    return failed > 0 ? kExitFailure : 0;
  }

  if (synth->parsed()) {
    std::size_t n_train = 0, n_test = 0, n_trials = 0;
    const gtfc_status s = gtfc_synth(synth_out.c_str(), opts.get(), &n_train, &n_test, &n_trials);
    if (s != GTFC_OK) return report(s, "synth");
    std::cout << "train=" << n_train << " test=" << n_test << " trials=" << n_trials << '\n';
    return 0;
  }

  if (train->parsed()) {
    gtfc_train_summary sum{};
    const gtfc_status s = gtfc_train(train_manifest.c_str(), train_out.c_str(), opts.get(),
                                     log_to_stderr, nullptr, &sum);
    if (s != GTFC_OK) return report(s, "train");
    std::printf("initial_loss=%.6f final_loss=%.6f steps=%zu params=%zu speakers=%zu\n",
                sum.initial_loss, sum.final_loss, sum.steps, sum.num_params, sum.num_speakers);
    return 0;
  }

  if (embed->parsed()) {
    gtfc_model* raw = nullptr;
    gtfc_status s = gtfc_model_load(ckpt.c_str(), &raw);
    if (s != GTFC_OK) return report(s, "embed");
    ModelPtr model(raw, gtfc_model_free);
    std::size_t count = 0;
    s = gtfc_embed_manifest(model.get(), embed_manifest.c_str(), embed_out.c_str(), &count);
    if (s != GTFC_OK) return report(s, "embed");
    std::cout << "embedded=" << count << '\n';
    return 0;
  }

  if (score->parsed()) {
    return report(gtfc_score_trials(embeds.c_str(), score_trials.c_str(), score_out.c_str()),
                  "score");
  }

  if (eval->parsed()) {
    gtfc_scores* raw = nullptr;
    gtfc_status s = gtfc_scores_load(eval_scores.c_str(), eval_trials.c_str(), &raw);
    if (s != GTFC_OK) return report(s, "eval");
    ScoresPtr set(raw, gtfc_scores_free);
    double eer = 0, thr = 0, dcf = 0;
    s = gtfc_scores_eer(set.get(), &eer, &thr);
    if (s != GTFC_OK) return report(s, "eval");
    s = gtfc_scores_min_dcf(set.get(), p_target, 1.0, 1.0, &dcf);
    if (s != GTFC_OK) return report(s, "eval");
    std::printf("EER=%.2f%% minDCF=%.4f\n", 100.0 * eer, dcf);
    return 0;
  }

  if (grad->parsed()) {
    gtfc_gradcheck_report rep{};
    const std::string target = grad_backbone ? "backbone:" + grad_block : grad_block;
    const gtfc_status s = gtfc_gradcheck(target.c_str(), opts.get(), &rep);
    if (s != GTFC_OK) return report(s, "gradcheck");
    std::printf("max_rel_error=%.3e\n", rep.max_rel_error);
    if (!rep.passed) {
      std::fprintf(stderr, "gtfc gradcheck: worst coordinate %s analytic=%.9e numeric=%.9e\n",
                   rep.worst, rep.analytic, rep.numeric);
      return kExitGradcheck;
    }
    return 0;
  }

  if (fuse->parsed()) {
    gtfc_scores *a = nullptr, *b = nullptr, *f = nullptr;
    gtfc_status s = gtfc_scores_load(scores_a.c_str(), nullptr, &a);
    if (s != GTFC_OK) return report(s, "fuse");
    ScoresPtr pa(a, gtfc_scores_free);
    s = gtfc_scores_load(scores_b.c_str(), nullptr, &b);
    if (s != GTFC_OK) return report(s, "fuse");
    ScoresPtr pb(b, gtfc_scores_free);
    s = gtfc_scores_fuse(a, b, weight_a, 1.0 - weight_a, &f);
    if (s != GTFC_OK) return report(s, "fuse");
    ScoresPtr pf(f, gtfc_scores_free);
    return report(gtfc_scores_write(f, fuse_out.c_str()), "fuse");
  }
  return kExitUsage;
}
