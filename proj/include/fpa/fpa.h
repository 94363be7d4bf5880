/*
 * Copyright 2026 The FPA Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the FPA library. Every function returns an fpa_status;
 * on failure fpa_last_error() describes the problem for the calling thread. */
#ifndef FPA_FPA_H_
#define FPA_FPA_H_

#include <stddef.h>
#include <stdint.h>

#if defined(FPA_BUILDING_LIBRARY)
#define FPA_API __attribute__((visibility("default")))
#else
#define FPA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fpa_status {
  FPA_OK = 0,
  FPA_ERR_INTERNAL = 1,
  FPA_ERR_CONFIG = 2,
  FPA_ERR_DATA = 3,
  FPA_ERR_DIVERGENCE = 4,
  FPA_ERR_INVALID_ARGUMENT = 5,
  FPA_ERR_SHAPE = 6
} fpa_status;

FPA_API const char* fpa_last_error(void);
FPA_API const char* fpa_version(void);

/* ---- datasets (raw pixel values, H x W x C per sample) ---- */

typedef struct fpa_dataset fpa_dataset;

FPA_API fpa_status fpa_dataset_synthetic(size_t num_samples, uint64_t seed,
                                         fpa_dataset** out);
FPA_API fpa_status fpa_dataset_load_idx(const char* images_path,
                                        const char* labels_path,
                                        fpa_dataset** out);
FPA_API fpa_status fpa_dataset_write_idx(const fpa_dataset* dataset,
                                         const char* images_path,
                                         const char* labels_path);
FPA_API fpa_status fpa_dataset_info(const fpa_dataset* dataset,
                                    size_t* num_samples, size_t* height,
                                    size_t* width, size_t* channels,
                                    size_t* num_classes);
/* Copies sample `index` into `pixels` (capacity `len`). */
FPA_API fpa_status fpa_dataset_sample(const fpa_dataset* dataset, size_t index,
                                      float* pixels, size_t len, int* label);
FPA_API void fpa_dataset_free(fpa_dataset* dataset);

/* ---- models ---- */

typedef struct fpa_model fpa_model;

FPA_API fpa_status fpa_model_load(const char* checkpoint_path,
                                  fpa_model** out);
FPA_API fpa_status fpa_model_info(const fpa_model* model, size_t* height,
                                  size_t* width, size_t* channels,
                                  size_t* num_classes);
/* Maps raw pixels to the model's input space using the checkpoint's
 * normalization. */
FPA_API fpa_status fpa_model_normalize(const fpa_model* model,
                                       const float* raw, float* out,
                                       size_t len);
/* `image` is in model space. Writes num_classes logits. */
FPA_API fpa_status fpa_model_logits(const fpa_model* model, const float* image,
                                    size_t len, float* logits,
                                    size_t num_logits);
/* Computes the 2D map of one catalog estimator (e.g. "ig_sum") for the
 * predicted class of `image` (model space). Writes H x W scores. */
FPA_API fpa_status fpa_model_saliency(const fpa_model* model,
                                      const float* image, size_t len,
                                      const char* estimator, uint64_t seed,
                                      int* predicted_class, float* map,
                                      size_t map_len);
FPA_API void fpa_model_free(fpa_model* model);

/* ---- augmentation and metrics ---- */

typedef struct fpa_augment_params {
  double p;
  double p1_max;
  double p2;
  size_t s_max;
  float mask_value;
} fpa_augment_params;

FPA_API fpa_augment_params fpa_augment_defaults(void);
/* Applies feature perturbation augmentation to a K x H x W x C batch. `in`
 * and `out` may alias. */
FPA_API fpa_status fpa_augment_batch(const float* in, float* out, size_t k,
                                     size_t h, size_t w, size_t c,
                                     const fpa_augment_params* params,
                                     uint64_t seed);
/* Area between LIF and MIF curves, fraction axis in percentage points. */
FPA_API fpa_status fpa_fidelity_area(const double* fractions, size_t n,
                                     const double* lif, const double* mif,
                                     double* area);

/* ---- commands ---- */

typedef void (*fpa_log_fn)(const char* message, void* user);

typedef struct fpa_options {
  const char* config;
  const char* out_dir;     /* NULL: current directory */
  const char* arm;         /* none | fpa | rectangle, NULL: from config */
  const char* checkpoint;
  const char* archive;
  const char* curves;
  const char* estimators;  /* comma-separated catalog ids, NULL: config */
  int has_seed;
  uint64_t seed;
  int has_samples;
  size_t samples;
  size_t sample_id;
  double percentile;
  fpa_log_fn log;
  void* log_user;
} fpa_options;

FPA_API fpa_options fpa_options_defaults(void);
FPA_API fpa_status fpa_cmd_train(const fpa_options* options);
FPA_API fpa_status fpa_cmd_saliency(const fpa_options* options);
FPA_API fpa_status fpa_cmd_curves(const fpa_options* options);
FPA_API fpa_status fpa_cmd_report(const fpa_options* options);
FPA_API fpa_status fpa_cmd_reproduce(const fpa_options* options);

#ifdef __cplusplus
}
#endif

#endif /* FPA_FPA_H_ */
