// Copyright 2026 The ordmil Authors.
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

/* C interface to the ordmil library. All functions return an ordmil_status;
 * on failure ordmil_last_error() describes the problem. Error text and
 * command summaries live in thread-local storage and stay valid until the
 * next call on the same thread. */

#ifndef ORDMIL_ORDMIL_H_
#define ORDMIL_ORDMIL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(ORDMIL_BUILDING)
#define ORDMIL_API __attribute__((visibility("default")))
#else
#define ORDMIL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ordmil_status {
  ORDMIL_OK = 0,
  ORDMIL_ERR_INVALID_ARGUMENT = 1,
  ORDMIL_ERR_PARSE = 2,
  ORDMIL_ERR_IO = 3,
  ORDMIL_ERR_SHAPE_MISMATCH = 4,
  ORDMIL_ERR_UNDEFINED = 5,
  ORDMIL_ERR_INTERNAL = 6
} ordmil_status;

enum { ORDMIL_NUM_CLASSES = 4 };

ORDMIL_API const char* ordmil_version(void);
ORDMIL_API const char* ordmil_last_error(void);
ORDMIL_API const char* ordmil_status_name(ordmil_status status);

/* ---- run configuration and commands ---------------------------------- */

typedef struct ordmil_config ordmil_config;

/* `seed_override` is applied when non-NULL. */
ORDMIL_API ordmil_status ordmil_config_load(const char* path,
                                            const uint64_t* seed_override,
                                            ordmil_config** out);
ORDMIL_API ordmil_status ordmil_config_parse(const char* text,
                                             const uint64_t* seed_override,
                                             ordmil_config** out);
ORDMIL_API void ordmil_config_free(ordmil_config* config);
/* Resolved configuration as JSON, valid until the next call on this thread. */
ORDMIL_API const char* ordmil_config_resolved_json(const ordmil_config* config);

typedef struct ordmil_cmd_options {
  const char* out_dir; /* run directory, required */
  const char* mode;    /* "binary:M", "ensemble", "regression", "all"; NULL = all */
  int fold;            /* single fold, or -1 for every fold */
  double grid_step;    /* overrides both grid steps when > 0 */
} ordmil_cmd_options;

ORDMIL_API ordmil_cmd_options ordmil_cmd_options_default(void);

ORDMIL_API ordmil_status ordmil_cmd_gen(const ordmil_config* config,
                                        const ordmil_cmd_options* options);
ORDMIL_API ordmil_status ordmil_cmd_qc_train(const ordmil_config* config,
                                             const ordmil_cmd_options* options);
ORDMIL_API ordmil_status ordmil_cmd_qc_filter(const ordmil_config* config,
                                              const ordmil_cmd_options* options);
ORDMIL_API ordmil_status ordmil_cmd_train(const ordmil_config* config,
                                          const ordmil_cmd_options* options);
ORDMIL_API ordmil_status ordmil_cmd_tune(const ordmil_config* config,
                                         const ordmil_cmd_options* options);
ORDMIL_API ordmil_status ordmil_cmd_eval(const ordmil_config* config,
                                         const ordmil_cmd_options* options);
/* Summary text of the last successful command on this thread. */
ORDMIL_API const char* ordmil_last_summary(void);

/* ---- datasets --------------------------------------------------------- */

typedef struct ordmil_dataset ordmil_dataset;

ORDMIL_API ordmil_status ordmil_dataset_load(const char* path, ordmil_dataset** out);
ORDMIL_API ordmil_status ordmil_dataset_generate(const ordmil_config* config,
                                                 ordmil_dataset** out);
ORDMIL_API ordmil_status ordmil_dataset_save(const ordmil_dataset* dataset,
                                             const char* path);
ORDMIL_API void ordmil_dataset_free(ordmil_dataset* dataset);
ORDMIL_API size_t ordmil_dataset_dim(const ordmil_dataset* dataset);
ORDMIL_API size_t ordmil_dataset_num_bags(const ordmil_dataset* dataset);
ORDMIL_API ordmil_status ordmil_dataset_bag_info(const ordmil_dataset* dataset,
                                                 size_t bag, int* mes,
                                                 size_t* num_frames);
/* Copies one frame into `out` (capacity `dim`). */
ORDMIL_API ordmil_status ordmil_dataset_frame(const ordmil_dataset* dataset,
                                              size_t bag, size_t frame,
                                              double* out, size_t dim);
/* Class counts per MES into `out[4]`. */
ORDMIL_API ordmil_status ordmil_dataset_histogram(const ordmil_dataset* dataset,
                                                  size_t out[4]);

/* ---- scorers and the artifact filter ---------------------------------- */

typedef struct ordmil_scorer ordmil_scorer;

ORDMIL_API ordmil_status ordmil_scorer_load(const char* path, ordmil_scorer** out);
ORDMIL_API void ordmil_scorer_free(ordmil_scorer* scorer);
ORDMIL_API size_t ordmil_scorer_input_dim(const ordmil_scorer* scorer);
/* 1 for a sigmoid head, 0 for a linear head. */
ORDMIL_API int ordmil_scorer_is_sigmoid(const ordmil_scorer* scorer);
/* Head output for one frame (probability or unclipped regression score). */
ORDMIL_API ordmil_status ordmil_scorer_score(const ordmil_scorer* scorer,
                                             const double* frame, size_t dim,
                                             double* out);

typedef struct ordmil_svm ordmil_svm;

ORDMIL_API ordmil_status ordmil_svm_load(const char* path, ordmil_svm** out);
ORDMIL_API void ordmil_svm_free(ordmil_svm* svm);
/* +1 artifact, -1 clean. */
ORDMIL_API ordmil_status ordmil_svm_predict(const ordmil_svm* svm,
                                            const double* frame, size_t dim,
                                            int* out);

/* ---- ordinal aggregation ---------------------------------------------- */

/* probs may be NULL. */
ORDMIL_API ordmil_status ordmil_aggregate_convert(const double triple[3], int* label,
                                                  double probs[4]);
ORDMIL_API ordmil_status ordmil_aggregate_threshold(const double triple[3],
                                                    const double thresholds[3],
                                                    int* label);
ORDMIL_API double ordmil_aggregate_sum(const double triple[3]);
ORDMIL_API ordmil_status ordmil_bin_ordinal(double score, const double thresholds[3],
                                            int* label);
ORDMIL_API ordmil_status ordmil_clip_score(double score, double* out);

/* ---- metrics ---------------------------------------------------------- */

ORDMIL_API ordmil_status ordmil_roc_auc(const double* scores, const int* labels,
                                        size_t n, double* out);
ORDMIL_API ordmil_status ordmil_kappa_quadratic(const int* truth, const int* pred,
                                                size_t n, int classes, double* out);
/* ratings: row-major items x raters, categories 0..categories-1. */
ORDMIL_API ordmil_status ordmil_fleiss_kappa(const int* ratings, size_t items,
                                             size_t raters, int categories,
                                             double* out);
ORDMIL_API ordmil_status ordmil_fold_ci(const double* values, size_t n, double z,
                                        double* mean, double* lower, double* upper);
ORDMIL_API ordmil_status ordmil_adjust_frame_label(int frame_label, int video_label,
                                                   int* out);
ORDMIL_API ordmil_status ordmil_majority_consensus(const int* ratings, size_t n,
                                                   int* out);

#ifdef __cplusplus
}
#endif

#endif  /* ORDMIL_ORDMIL_H_ */
