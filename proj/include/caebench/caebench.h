// Copyright 2026 The caebench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CAEBENCH_CAEBENCH_H_
#define CAEBENCH_CAEBENCH_H_

/* Stable C interface to the caebench core. Every call returns a cae_status;
 * on failure cae_last_error() holds a message for the calling thread.
 * Handles are opaque and owned by the caller until the matching _free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CAE_API __declspec(dllexport)
#else
#define CAE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cae_status {
  CAE_OK = 0,
  CAE_ERR_INVALID_ARGUMENT = 1,
  CAE_ERR_SHAPE = 2,
  CAE_ERR_FORMAT = 3,
  CAE_ERR_IO = 4,
  CAE_ERR_NUMERIC = 5,
  CAE_ERR_INFEASIBLE = 6,
  CAE_ERR_MODEL_MISMATCH = 7,
  CAE_ERR_NOT_FOUND = 8,
  CAE_ERR_CONFLICT = 9,
  CAE_ERR_INTERNAL = 10
} cae_status;

CAE_API const char* cae_version(void);
CAE_API const char* cae_status_name(cae_status status);
/* Message of the last failed call on this thread; "" after success. */
CAE_API const char* cae_last_error(void);

/* ---- models ---------------------------------------------------------- */

typedef struct cae_model cae_model;

typedef enum cae_metric { CAE_METRIC_MSE = 0, CAE_METRIC_MSSSIM = 1 } cae_metric;

typedef struct cae_model_info {
  uint32_t units;
  uint32_t filters;
  uint32_t latent_channels;
  uint32_t downscale;
  uint64_t hash;
  double lambda;
  cae_metric metric;
  uint64_t iterations;
} cae_model_info;

CAE_API cae_status cae_model_create(uint32_t units, uint32_t filters, uint32_t latent_channels, uint64_t seed,
                                    cae_model** out);
CAE_API cae_status cae_model_load(const char* path, cae_model** out);
CAE_API cae_status cae_model_save(const cae_model* model, const char* path);
CAE_API cae_status cae_model_get_info(const cae_model* model, cae_model_info* info);
CAE_API void cae_model_free(cae_model* model);

/* ---- training -------------------------------------------------------- */

typedef struct cae_train_config {
  double lambda;
  cae_metric metric;
  uint64_t iterations;
  uint32_t batch;
  double learning_rate;
  uint32_t crop;
  uint64_t seed;
} cae_train_config;

/* batch 16, learning rate 1e-4, crop 128, MSE, 1 iteration. */
CAE_API void cae_train_config_default(cae_train_config* config);

typedef void (*cae_train_callback)(uint64_t iteration, double loss, double distortion, double bits_per_pixel,
                                   void* user);

typedef struct cae_train_report {
  uint64_t iterations_run;
  uint64_t skipped_steps;
  int aborted;
  double final_loss;
} cae_train_report;

/* Trains a copy of `initial` on the listed images. When `loss_csv` is set a
 * row per iteration is written there. `out` receives the trained model,
 * also when training aborted on divergence (report->aborted). */
CAE_API cae_status cae_train(const cae_model* initial, const char* const* image_paths, size_t image_count,
                             const cae_train_config* config, const char* loss_csv, cae_train_callback callback,
                             void* user, cae_model** out, cae_train_report* report);

/* ---- bitstreams ------------------------------------------------------ */

typedef struct cae_encode_options {
  uint32_t tile_size; /* 256 */
  uint32_t overlap;   /* 0 */
  uint32_t threads;   /* 0: all cores */
} cae_encode_options;

CAE_API void cae_encode_options_default(cae_encode_options* options);

typedef struct cae_stream_info {
  uint32_t width;
  uint32_t height;
  uint32_t tile_size;
  uint32_t overlap;
  uint32_t tiles;
  uint32_t latent_channels;
  uint64_t model_hash;
  uint64_t bytes;
  double bits_per_pixel;
} cae_stream_info;

typedef struct cae_encode_report {
  cae_stream_info stream;
  uint64_t payload_bits;
  double estimated_bits;
} cae_encode_report;

CAE_API cae_status cae_encode_file(const cae_model* model, const char* image_path, const char* stream_path,
                                   const cae_encode_options* options, cae_encode_report* report);

/* abut != 0 pastes tile cores without cross-fading. */
CAE_API cae_status cae_decode_file(const cae_model* model, const char* stream_path, const char* image_path,
                                   uint32_t threads, int abut, cae_stream_info* info);

CAE_API cae_status cae_stream_info_read(const char* stream_path, cae_stream_info* info);

/* ---- metrics --------------------------------------------------------- */

typedef struct cae_quality {
  int identical;  /* psnr_db is +inf when set */
  double psnr_db;
  double channel_mse[3];
  double ms_ssim;
  int has_bits_per_pixel;
  double bits_per_pixel;
} cae_quality;

/* `stream_path` may be NULL; otherwise its size gives bits_per_pixel. */
CAE_API cae_status cae_metrics_files(const char* reference_path, const char* distorted_path, const char* stream_path,
                                     cae_quality* quality);

/* ---- subjective analysis --------------------------------------------- */

typedef struct cae_analyze_options {
  const char* thresholds_path; /* may be NULL */
  int include_lowest_rate;
  int skip_screening;
  double alpha; /* 0.05 */
} cae_analyze_options;

CAE_API void cae_analyze_options_default(cae_analyze_options* options);

typedef struct cae_analyze_report {
  size_t subjects;
  size_t rejected_subjects;
  size_t stimuli;
  size_t ratings;
  size_t matrices;
} cae_analyze_report;

/* Writes mos.csv, dmos.csv, pairwise.csv and outliers.csv into out_dir. */
CAE_API cae_status cae_analyze(const char* scores_csv, const cae_analyze_options* options, const char* out_dir,
                               cae_analyze_report* report);

/* ---- session design and rating service ------------------------------- */

typedef struct cae_design_config {
  const char* const* codecs;
  size_t codec_count;
  const char* const* contents;
  size_t content_count;
  const char* const* rates;
  size_t rate_count;
  const char* const* subjects;
  size_t subject_count;
  const char* media_root;
  int include_references;
  int training;
  const char* training_content; /* NULL: first content */
  uint64_t seed;
} cae_design_config;

typedef struct cae_design_report {
  size_t coded;
  size_t references;
  size_t training;
  size_t subjects;
  size_t session_sizes[2];
} cae_design_report;

/* Writes manifest.csv and plan.csv into out_dir. */
CAE_API cae_status cae_session_design(const cae_design_config* config, const char* out_dir,
                                      cae_design_report* report);

typedef struct cae_service cae_service;

/* static_dir may be NULL; otherwise its files are served under "/". */
CAE_API cae_status cae_service_open(const char* design_dir, const char* media_root, const char* state_dir,
                                    const char* static_dir, cae_service** out);
/* port 0 picks a free port; *bound_port receives the result. */
CAE_API cae_status cae_service_bind(cae_service* service, const char* host, int port, int* bound_port);
/* Serves until cae_service_stop. */
CAE_API cae_status cae_service_run(cae_service* service);
/* Safe to call from another thread. */
CAE_API void cae_service_stop(cae_service* service);
CAE_API size_t cae_service_rating_count(const cae_service* service);
CAE_API void cae_service_free(cae_service* service);

#ifdef __cplusplus
}
#endif

#endif /* CAEBENCH_CAEBENCH_H_ */
