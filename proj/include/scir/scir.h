// Copyright 2026 The SCIR Lab Authors.
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

#ifndef SCIR_SCIR_H_
#define SCIR_SCIR_H_

/*
 * C interface of the SCIR lab library.
 *
 * Every function returns a scir_status. On failure a description is available
 * from scir_last_error() on the calling thread until the next API call on that
 * thread. Strings returned through char** out-parameters are owned by the
 * caller and released with scir_string_free().
 */

#include <stddef.h>

#if defined(_WIN32)
#define SCIR_API __declspec(dllexport)
#else
#define SCIR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum scir_status {
  SCIR_OK = 0,
  SCIR_ERR_INVALID_ARGUMENT = 1,
  SCIR_ERR_CONFIG = 2,
  SCIR_ERR_IO = 3,
  SCIR_ERR_NUMERIC = 4,
  SCIR_ERR_LOCKED = 5,
  SCIR_ERR_CHECK_FAILED = 6,
  SCIR_ERR_INTERNAL = 7
} scir_status;

typedef enum scir_label {
  SCIR_LABEL_A = 0,
  SCIR_LABEL_B = 1,
  SCIR_LABEL_UNDEFINED = 2
} scir_label;

/* Resolved run configuration. */
typedef struct scir_config scir_config;

/* Receives progress lines; `user` is passed through unchanged. */
typedef void (*scir_log_fn)(const char* line, void* user);

SCIR_API const char* scir_version(void);
SCIR_API const char* scir_last_error(void);
SCIR_API const char* scir_status_name(scir_status status);
SCIR_API void scir_string_free(char* s);

/* Process-wide log sink; NULL disables logging. */
SCIR_API void scir_set_log(scir_log_fn fn, void* user);

/* --- configuration --------------------------------------------------------- */

SCIR_API scir_status scir_config_default(scir_config** out);
/* Strict JSON parse of `path`. Unknown keys fail with SCIR_ERR_CONFIG. */
SCIR_API scir_status scir_config_load(const char* path, scir_config** out);
/* Dotted-key override, e.g. ("train.tau", "0.9"). Revalidates. */
SCIR_API scir_status scir_config_set(scir_config* cfg, const char* key,
                                     const char* value);
/* Like scir_config_set, but fails with SCIR_ERR_CONFIG when the loaded file
 * sets `key` explicitly to a different value. Used for command-line flags. */
SCIR_API scir_status scir_config_set_flag(scir_config* cfg, const char* key,
                                          const char* value);
/* Fills paths.run_dir from the environment when neither the file nor an
 * override set it. */
SCIR_API scir_status scir_config_apply_env(scir_config* cfg);
SCIR_API scir_status scir_config_to_json(const scir_config* cfg, char** out);
SCIR_API void scir_config_free(scir_config* cfg);

/* --- commands ---------------------------------------------------------------
 * Each command locks the run directory and writes a JSON summary to *summary
 * (may be NULL). */

SCIR_API scir_status scir_gen_data(const scir_config* cfg, char** summary);
SCIR_API scir_status scir_sft(const scir_config* cfg, char** summary);
SCIR_API scir_status scir_iterate(const scir_config* cfg, char** summary);
/* `checkpoint` NULL or "" selects the latest M_t; `baseline` defaults to M_0. */
SCIR_API scir_status scir_eval(const scir_config* cfg, const char* checkpoint,
                               const char* baseline, char** summary);
/* Returns SCIR_ERR_CHECK_FAILED (with a summary) when any entry fails.
 * entries_per_instance 0 checks every parameter. */
SCIR_API scir_status scir_gradcheck(int instances, size_t entries_per_instance,
                                    unsigned long long seed, char** summary);
SCIR_API scir_status scir_report(const scir_config* cfg, char** summary);

/* --- checkpoints ------------------------------------------------------------ */

/* Verifies `<dir>/<tag>.bin` against its manifest and returns the hash. */
SCIR_API scir_status scir_checkpoint_sha256(const char* dir, const char* tag,
                                            char** out);
SCIR_API scir_status scir_checkpoint_param_count(const char* dir,
                                                 const char* tag, size_t* out);

/* --- pure helpers ------------------------------------------------------------ */

SCIR_API scir_status scir_hard_label(double p, double epsilon_tie,
                                     scir_label* out);
SCIR_API scir_status scir_dpo_loss(double logratio_w, double logratio_l,
                                   double beta, double* out);
SCIR_API scir_status scir_bernoulli_kl(double q, double p, double* out);
SCIR_API scir_status scir_bernoulli_entropy(double q, double* out);
SCIR_API scir_status scir_consistency_loss(double p, double q, double tau,
                                           int literal, double* out);
SCIR_API scir_status scir_gold_score(int op, const int* input, size_t input_len,
                                     const int* response, size_t response_len,
                                     double* out);

#ifdef __cplusplus
}
#endif

#endif /* SCIR_SCIR_H_ */
