/* Copyright 2026 The GTFC Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the GTFC speaker-embedding library.
 *
 * Every call returns a gtfc_status. On failure the message for the calling
 * thread is available from gtfc_last_error() until that thread's next call.
 * Handles are opaque and owned by the caller; release them with the
 * matching *_free function (NULL is accepted).
 */

#ifndef GTFC_GTFC_H_
#define GTFC_GTFC_H_

#include <stddef.h>

#if defined(_WIN32)
#define GTFC_API __declspec(dllexport)
#else
#define GTFC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gtfc_status {
  GTFC_OK = 0,
  GTFC_ERR_INVALID_ARGUMENT = 1,
  GTFC_ERR_SHAPE_MISMATCH = 2,
  GTFC_ERR_DOMAIN = 3,
  GTFC_ERR_CONFIG = 4,
  GTFC_ERR_UNKNOWN_OPERATOR = 5,
  GTFC_ERR_GROUP_MISMATCH = 6,
  GTFC_ERR_TOO_SHORT = 7,
  GTFC_ERR_NON_FINITE_LOSS = 8,
  GTFC_ERR_DEGENERATE_SET = 9,
  GTFC_ERR_TRIAL_MISMATCH = 10,
  GTFC_ERR_ZERO_VECTOR = 11,
  GTFC_ERR_MISSING_UTTERANCE = 12,
  GTFC_ERR_IO = 13,
  GTFC_ERR_FORMAT = 14,
  GTFC_ERR_EMPTY_SIGNAL = 15,
  GTFC_ERR_BATCH_TOO_SMALL = 16,
  GTFC_ERR_INTERNAL = 99
} gtfc_status;

/* Message for the last failure on this thread; "" after a success. */
GTFC_API const char* gtfc_last_error(void);
GTFC_API const char* gtfc_status_name(gtfc_status status);
GTFC_API const char* gtfc_version(void);

/* Optional sink for per-item diagnostics (skipped files and the like). */
typedef void (*gtfc_log_fn)(const char* message, void* user);

/* ---- options ---------------------------------------------------------------
 * String key/value settings. Unknown keys fail with GTFC_ERR_CONFIG; values
 * are checked when a command uses them. Keys: seed, precision (f32|f64),
 * frontend (window_ms, hop_ms, num_mels, fft_size, mel_low_hz, mel_high_hz,
 * vad_threshold, vad_mean_scale, chunk_min, chunk_max), corpus (speakers,
 * train_per_speaker, test_per_speaker, trials, duration_s, noise_floor),
 * model (model_spec desk|full, block, p, groups, gate, pos, embedding_dim,
 * rho_init, tau_init, attn_hidden, epsilon, per_group_we, se_reduction),
 * training (epochs, batch_size, lr, momentum, weight_decay, plateau_factor,
 * plateau_patience, val_fraction) and gradcheck (channels, step, tol). */
typedef struct gtfc_options gtfc_options;

GTFC_API gtfc_status gtfc_options_create(gtfc_options** out);
GTFC_API gtfc_status gtfc_options_set(gtfc_options* options, const char* key, const char* value);
GTFC_API void gtfc_options_free(gtfc_options* options);

/* ---- data -------------------------------------------------------------------- */

/* Features and a manifest for every *.wav under wav_dir. A missing or
 * unreadable directory fails with GTFC_ERR_IO; per-file failures are logged,
 * counted in *failed, and do not fail the call. */
GTFC_API gtfc_status gtfc_extract(const char* wav_dir, const char* manifest_out,
                                  const char* feat_dir, const gtfc_options* options,
                                  gtfc_log_fn log, void* log_user, size_t* written,
                                  size_t* failed);

/* Synthetic multi-speaker corpus: out_dir/{train,test}/<spk>/<utt>.wav and
 * out_dir/trials.txt. */
GTFC_API gtfc_status gtfc_synth(const char* out_dir, const gtfc_options* options,
                                size_t* train_files, size_t* test_files, size_t* trials);

/* ---- training ------------------------------------------------------------------ */

typedef struct gtfc_train_summary {
  double initial_loss; /* first step */
  double final_loss;   /* mean over the last epoch */
  double final_lr;
  size_t steps;
  size_t num_params;
  size_t num_examples;
  size_t num_speakers;
} gtfc_train_summary;

/* Trains on an extracted manifest; writes out_dir/checkpoint/ and
 * out_dir/train.log (one "step<TAB>loss<TAB>lr" line per step). */
GTFC_API gtfc_status gtfc_train(const char* manifest, const char* out_dir,
                                const gtfc_options* options, gtfc_log_fn log, void* log_user,
                                gtfc_train_summary* summary);

/* ---- models -------------------------------------------------------------------- */

typedef struct gtfc_model gtfc_model;

/* Accepts a checkpoint directory or the training output directory holding it. */
GTFC_API gtfc_status gtfc_model_load(const char* checkpoint, gtfc_model** out);
GTFC_API void gtfc_model_free(gtfc_model* model);
GTFC_API gtfc_status gtfc_model_info(const gtfc_model* model, size_t* input_dim,
                                     size_t* embedding_dim, size_t* num_params);

/* Eval-mode embedding of a row-major (frames, dims) feature matrix.
 * out must hold embedding_dim values. */
GTFC_API gtfc_status gtfc_model_embed(gtfc_model* model, const double* features, size_t frames,
                                      size_t dims, double* out, size_t out_len);

/* Embeds every manifest entry into a text file of "utt v0 v1 ..." lines. */
GTFC_API gtfc_status gtfc_embed_manifest(gtfc_model* model, const char* manifest,
                                         const char* embeds_out, size_t* count);

/* ---- scoring ------------------------------------------------------------------- */

/* Cosine-scores every trial into "enroll test score" lines. Absent
 * utterances fail with GTFC_ERR_MISSING_UTTERANCE naming them. */
GTFC_API gtfc_status gtfc_score_trials(const char* embeds, const char* trials,
                                       const char* scores_out);

typedef struct gtfc_scores gtfc_scores;

/* Loads a score file. With a trial list, every trial must be scored and
 * the rows take the trial labels and order. */
GTFC_API gtfc_status gtfc_scores_load(const char* scores, const char* trials_or_null,
                                      gtfc_scores** out);
GTFC_API void gtfc_scores_free(gtfc_scores* scores);
GTFC_API gtfc_status gtfc_scores_count(const gtfc_scores* scores, size_t* count);
/* EER as a fraction in [0, 1]. */
GTFC_API gtfc_status gtfc_scores_eer(const gtfc_scores* scores, double* eer, double* threshold);
/* Normalised minimum detection cost. */
GTFC_API gtfc_status gtfc_scores_min_dcf(const gtfc_scores* scores, double p_target,
                                         double c_miss, double c_fa, double* out);
/* w_a * a + w_b * b per trial; keys and labels must agree. */
GTFC_API gtfc_status gtfc_scores_fuse(const gtfc_scores* a, const gtfc_scores* b, double w_a,
                                      double w_b, gtfc_scores** out);
GTFC_API gtfc_status gtfc_scores_write(const gtfc_scores* scores, const char* path);

/* ---- verification -------------------------------------------------------------- */

typedef struct gtfc_gradcheck_report {
  double max_rel_error;
  double analytic; /* at the worst coordinate */
  double numeric;
  int passed;
  char worst[128]; /* "<parameter>[<flat index>]" */
} gtfc_gradcheck_report;

/* Central-difference gradient check of one block ("se", "c-gtfc",
 * "tf-gtfc") on a random (channels, 3, 4) map, or of a two-stage backbone
 * with the block inserted when block is "backbone:<kind>". Uses the
 * options' p, groups, gate, seed, channels, step and tol. A failed check
 * is reported through report->passed, not the status. */
GTFC_API gtfc_status gtfc_gradcheck(const char* block, const gtfc_options* options,
                                    gtfc_gradcheck_report* report);

/* Closed-form trainable-parameter count of a block at a channel width. */
GTFC_API gtfc_status gtfc_block_param_count(const char* block, size_t channels,
                                            const gtfc_options* options, size_t* out);

#ifdef __cplusplus
}
#endif

#endif /* GTFC_GTFC_H_ */
