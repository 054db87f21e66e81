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

#include "gtfc/gtfc.h"

#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "frontend/synth.hpp"
#include "pipeline/pipeline.hpp"

struct gtfc_options {
  gtfc::pipeline::Options impl;
};

struct gtfc_model {
  gtfc::backbone::Model impl;
};

struct gtfc_scores {
  gtfc::metrics::TrialScoreSet impl;
};

namespace {

thread_local std::string g_last_error;

gtfc_status to_status(gtfc::ErrorCode code) {
  using gtfc::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidAxis:
    case ErrorCode::kNotScalar:
    case ErrorCode::kTapeAlreadyConsumed:
      return GTFC_ERR_INVALID_ARGUMENT;
    case ErrorCode::kShapeMismatch: return GTFC_ERR_SHAPE_MISMATCH;
    case ErrorCode::kDomainError:
    case ErrorCode::kNonFiniteOutput:
      return GTFC_ERR_DOMAIN;
    case ErrorCode::kConfigError: return GTFC_ERR_CONFIG;
    case ErrorCode::kUnknownOperator: return GTFC_ERR_UNKNOWN_OPERATOR;
    case ErrorCode::kGroupMismatch: return GTFC_ERR_GROUP_MISMATCH;
    case ErrorCode::kTooShort:
    case ErrorCode::kTooFewFrames:
      return GTFC_ERR_TOO_SHORT;
    case ErrorCode::kNonFiniteLoss: return GTFC_ERR_NON_FINITE_LOSS;
    case ErrorCode::kDegenerateSet: return GTFC_ERR_DEGENERATE_SET;
    case ErrorCode::kTrialMismatch: return GTFC_ERR_TRIAL_MISMATCH;
    case ErrorCode::kZeroVector: return GTFC_ERR_ZERO_VECTOR;
    case ErrorCode::kMissingUtterance: return GTFC_ERR_MISSING_UTTERANCE;
    case ErrorCode::kIo: return GTFC_ERR_IO;
    case ErrorCode::kFormat: return GTFC_ERR_FORMAT;
    case ErrorCode::kEmptySignal: return GTFC_ERR_EMPTY_SIGNAL;
    case ErrorCode::kBatchTooSmall: return GTFC_ERR_BATCH_TOO_SMALL;
  }
  return GTFC_ERR_INTERNAL;
}

// Runs `body`, translating exceptions into a status and the thread's
// last-error message.
template <typename F>
gtfc_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return GTFC_OK;
  } catch (const gtfc::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return GTFC_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) throw gtfc::Error(gtfc::ErrorCode::kInvalidArgument, what);
}

const gtfc::pipeline::Options& opts(const gtfc_options* o) {
  static const gtfc::pipeline::Options empty;
  return o ? o->impl : empty;
}

gtfc::pipeline::LogFn make_log(gtfc_log_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const std::string& msg) { fn(msg.c_str(), user); };
}

// Gradcheck and block counts default to 8 groups, the full-size setting.
gtfc::blocks::GtfcConfig standalone_block_config(const gtfc::pipeline::Options& o) {
  auto cfg = o.block_config();
  if (!o.has("groups")) cfg.groups = 8;
  return cfg;
}

}  // namespace

extern "C" {

const char* gtfc_last_error(void) { return g_last_error.c_str(); }

const char* gtfc_status_name(gtfc_status status) {
  switch (status) {
    case GTFC_OK: return "ok";
    case GTFC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case GTFC_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case GTFC_ERR_DOMAIN: return "domain error";
    case GTFC_ERR_CONFIG: return "config error";
    case GTFC_ERR_UNKNOWN_OPERATOR: return "unknown operator";
    case GTFC_ERR_GROUP_MISMATCH: return "group mismatch";
    case GTFC_ERR_TOO_SHORT: return "too short";
    case GTFC_ERR_NON_FINITE_LOSS: return "non-finite loss";
    case GTFC_ERR_DEGENERATE_SET: return "degenerate set";
    case GTFC_ERR_TRIAL_MISMATCH: return "trial mismatch";
    case GTFC_ERR_ZERO_VECTOR: return "zero vector";
    case GTFC_ERR_MISSING_UTTERANCE: return "missing utterance";
    case GTFC_ERR_IO: return "i/o error";
    case GTFC_ERR_FORMAT: return "format error";
    case GTFC_ERR_EMPTY_SIGNAL: return "empty signal";
    case GTFC_ERR_BATCH_TOO_SMALL: return "batch too small";
    case GTFC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* gtfc_version(void) { return "1.0.0"; }

gtfc_status gtfc_options_create(gtfc_options** out) {
  return guarded([&] {
    require(out, "out is null");
    *out = new gtfc_options();
  });
}

gtfc_status gtfc_options_set(gtfc_options* options, const char* key, const char* value) {
  return guarded([&] {
    require(options && key && value, "null argument");
    options->impl.set(key, value);
  });
}

void gtfc_options_free(gtfc_options* options) { delete options; }

gtfc_status gtfc_extract(const char* wav_dir, const char* manifest_out, const char* feat_dir,
                         const gtfc_options* options, gtfc_log_fn log, void* log_user,
                         size_t* written, size_t* failed) {
  return guarded([&] {
    require(wav_dir && manifest_out && feat_dir, "null path");
    const auto cfg = opts(options).frontend();
    const auto report =
        gtfc::pipeline::extract_directory(wav_dir, manifest_out, feat_dir, cfg, make_log(log, log_user));
    if (written) *written = report.written;
    if (failed) *failed = report.failed;
  });
}

gtfc_status gtfc_synth(const char* out_dir, const gtfc_options* options, size_t* train_files,
                       size_t* test_files, size_t* trials) {
  return guarded([&] {
    require(out_dir, "null path");
    const auto summary = gtfc::frontend::write_synthetic_corpus(out_dir, opts(options).synth());
    if (train_files) *train_files = summary.train_files;
    if (test_files) *test_files = summary.test_files;
    if (trials) *trials = summary.trials;
  });
}

gtfc_status gtfc_train(const char* manifest, const char* out_dir, const gtfc_options* options,
                       gtfc_log_fn log, void* log_user, gtfc_train_summary* summary) {
  return guarded([&] {
    require(manifest && out_dir, "null path");
    const auto outcome =
        gtfc::pipeline::train_from_manifest(manifest, out_dir, opts(options), make_log(log, log_user));
    if (summary) {
      summary->initial_loss = outcome.result.initial_loss;
      summary->final_loss = outcome.result.final_loss;
      summary->final_lr = outcome.result.final_lr;
      summary->steps = outcome.result.step_losses.size();
      summary->num_params = outcome.num_params;
      summary->num_examples = outcome.num_examples;
      summary->num_speakers = outcome.num_speakers;
    }
  });
}

gtfc_status gtfc_model_load(const char* checkpoint, gtfc_model** out) {
  return guarded([&] {
    require(checkpoint && out, "null argument");
    std::filesystem::path dir(checkpoint);
    if (!std::filesystem::exists(dir / "spec.txt") &&
        std::filesystem::exists(dir / "checkpoint" / "spec.txt")) {
      dir /= "checkpoint";
    }
    *out = new gtfc_model{gtfc::backbone::Model::load(dir)};
  });
}

void gtfc_model_free(gtfc_model* model) { delete model; }

gtfc_status gtfc_model_info(const gtfc_model* model, size_t* input_dim, size_t* embedding_dim,
                            size_t* num_params) {
  return guarded([&] {
    require(model, "null model");
    if (input_dim) *input_dim = model->impl.spec().input_dim;
    if (embedding_dim) *embedding_dim = model->impl.spec().embedding_dim;
    if (num_params) *num_params = model->impl.num_params();
  });
}

gtfc_status gtfc_model_embed(gtfc_model* model, const double* features, size_t frames,
                             size_t dims, double* out, size_t out_len) {
  return guarded([&] {
    require(model && features && out, "null argument");
    require(out_len >= model->impl.spec().embedding_dim, "output buffer too small");
    const auto e = model->impl.embed(gtfc::Tensor::from(
        {frames, dims}, std::vector<double>(features, features + frames * dims)));
    std::copy(e.begin(), e.end(), out);
  });
}

gtfc_status gtfc_embed_manifest(gtfc_model* model, const char* manifest, const char* embeds_out,
                                size_t* count) {
  return guarded([&] {
    require(model && manifest && embeds_out, "null argument");
    const auto table = gtfc::pipeline::embed_manifest(model->impl, manifest);
    gtfc::metrics::write_embeddings(embeds_out, table);
    if (count) *count = table.size();
  });
}

gtfc_status gtfc_score_trials(const char* embeds, const char* trials, const char* scores_out) {
  return guarded([&] {
    require(embeds && trials && scores_out, "null path");
    const auto table = gtfc::metrics::read_embeddings(embeds);
    const auto scored = gtfc::metrics::score_trials(table, gtfc::metrics::read_trials(trials));
    gtfc::metrics::write_scores(scores_out, scored);
  });
}

gtfc_status gtfc_scores_load(const char* scores, const char* trials_or_null, gtfc_scores** out) {
  return guarded([&] {
    require(scores && out, "null argument");
    auto set = gtfc::metrics::read_scores(scores);
    if (trials_or_null) {
      set = gtfc::metrics::attach_labels(set, gtfc::metrics::read_trials(trials_or_null));
    }
    *out = new gtfc_scores{std::move(set)};
  });
}

void gtfc_scores_free(gtfc_scores* scores) { delete scores; }

gtfc_status gtfc_scores_count(const gtfc_scores* scores, size_t* count) {
  return guarded([&] {
    require(scores && count, "null argument");
    *count = scores->impl.size();
  });
}

gtfc_status gtfc_scores_eer(const gtfc_scores* scores, double* eer, double* threshold) {
  return guarded([&] {
    require(scores, "null scores");
    const auto r = gtfc::metrics::eer(scores->impl);
    if (eer) *eer = r.eer;
    if (threshold) *threshold = r.threshold;
  });
}

gtfc_status gtfc_scores_min_dcf(const gtfc_scores* scores, double p_target, double c_miss,
                                double c_fa, double* out) {
  return guarded([&] {
    require(scores && out, "null argument");
    *out = gtfc::metrics::min_dcf(scores->impl, p_target, c_miss, c_fa);
  });
}

gtfc_status gtfc_scores_fuse(const gtfc_scores* a, const gtfc_scores* b, double w_a, double w_b,
                             gtfc_scores** out) {
  return guarded([&] {
    require(a && b && out, "null argument");
    *out = new gtfc_scores{gtfc::metrics::fuse(a->impl, b->impl, w_a, w_b)};
  });
}

gtfc_status gtfc_scores_write(const gtfc_scores* scores, const char* path) {
  return guarded([&] {
    require(scores && path, "null argument");
    gtfc::metrics::write_scores(path, scores->impl);
  });
}

gtfc_status gtfc_gradcheck(const char* block, const gtfc_options* options,
                           gtfc_gradcheck_report* report) {
  return guarded([&] {
    require(block && report, "null argument");
    const auto& o = opts(options);
    const auto cfg = standalone_block_config(o);
    const auto& values = o.values();
    auto num = [&](const char* key, double fallback) {
      const auto it = values.find(key);
      if (it == values.end()) return fallback;
      try {
        return std::stod(it->second);
      } catch (const std::exception&) {
        throw gtfc::Error(gtfc::ErrorCode::kConfigError, std::string(key) + ": not a number");
      }
    };
    const double step = num("step", 1e-5), tol = num("tol", 1e-4);
    std::string name(block);
    gtfc::GradcheckReport r;
    const std::string prefix = "backbone:";
    if (name.rfind(prefix, 0) == 0) {
      auto small = cfg;
      if (!o.has("groups")) small.groups = 2;  // the first stage is 4 channels wide
      if (!o.has("se_reduction")) small.se_reduction = 2;
      r = gtfc::pipeline::gradcheck_backbone(
          gtfc::blocks::parse_block_kind(name.substr(prefix.size())), small, o.seed(), step, tol);
    } else {
      const auto kind = gtfc::blocks::parse_block_kind(name);
      require(kind != gtfc::blocks::BlockKind::kNone, "gradcheck needs a block kind other than none");
      const auto channels = static_cast<std::size_t>(num("channels", 16));
      if (kind == gtfc::blocks::BlockKind::kTfGtfc && channels % cfg.groups != 0) {
        throw gtfc::Error(gtfc::ErrorCode::kGroupMismatch,
                          std::to_string(channels) + " channels do not split into " +
                              std::to_string(cfg.groups) + " groups");
      }
      r = gtfc::pipeline::gradcheck_block(kind, cfg, channels, o.seed(), step, tol);
    }
    report->max_rel_error = r.max_rel_error;
    report->analytic = r.worst_analytic;
    report->numeric = r.worst_numeric;
    report->passed = r.passed ? 1 : 0;
    std::memset(report->worst, 0, sizeof report->worst);
    std::strncpy(report->worst, r.worst.c_str(), sizeof report->worst - 1);
  });
}

gtfc_status gtfc_block_param_count(const char* block, size_t channels, const gtfc_options* options,
                                   size_t* out) {
  return guarded([&] {
    require(block && out, "null argument");
    const auto cfg = standalone_block_config(opts(options));
    *out = gtfc::blocks::param_count(gtfc::blocks::parse_block_kind(block), channels, cfg);
  });
}

}  // extern "C"
