/* C interface to the MambaHSI library. All functions are safe to call from C.
 * Every call returns a status; on failure mhsi_last_error() holds a message
 * (thread-local, valid until the next failing call on the same thread). */
#ifndef MAMBAHSI_H
#define MAMBAHSI_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define MHSI_API __declspec(dllexport)
#else
#define MHSI_API __attribute__((visibility("default")))
#endif

typedef enum mhsi_status {
  MHSI_OK = 0,
  MHSI_E_USAGE = 1,
  MHSI_E_DATA = 2,
  MHSI_E_NUMERIC = 3,
  MHSI_E_SHAPE = 4,
  MHSI_E_INTERNAL = 5
} mhsi_status;

typedef enum mhsi_mask { MHSI_MASK_TRAIN = 0, MHSI_MASK_VAL = 1, MHSI_MASK_TEST = 2 } mhsi_mask;

typedef enum mhsi_variant {
  MHSI_VARIANT_FULL = 0,
  MHSI_VARIANT_SUM = 1,
  MHSI_VARIANT_SPATIAL = 2,
  MHSI_VARIANT_SPECTRAL = 3
} mhsi_variant;

typedef enum mhsi_scan { MHSI_SCAN_SEQUENTIAL = 0, MHSI_SCAN_PARALLEL = 1 } mhsi_scan;

typedef enum mhsi_block_kind { MHSI_BLOCK_MAMBA = 0, MHSI_BLOCK_ATTENTION = 1 } mhsi_block_kind;

typedef struct mhsi_scene mhsi_scene;
typedef struct mhsi_model mhsi_model;
typedef struct mhsi_report mhsi_report;

typedef struct mhsi_config {
  uint32_t spectral_channels;
  uint32_t embed_dim;
  uint32_t spectral_groups;
  uint32_t encoder_depth;
  uint32_t class_count;
  uint32_t state_size;
  uint32_t expand;
  uint32_t conv_width;
  uint32_t gn_groups;
  float lr;
  uint32_t epochs;
  uint64_t seed;
  uint8_t variant;   /* mhsi_variant */
  uint8_t scan_mode; /* mhsi_scan */
} mhsi_config;

typedef struct mhsi_scene_info {
  uint32_t height;
  uint32_t width;
  uint32_t bands;
  uint32_t classes;
  size_t n_train;
  size_t n_val;
  size_t n_test;
} mhsi_scene_info;

typedef struct mhsi_train_summary {
  uint32_t epochs_run;
  uint32_t best_epoch; /* 0 when no epoch ran */
  int has_best_val;
  double best_val_oa;
} mhsi_train_summary;

typedef struct mhsi_report_summary {
  uint32_t classes;
  uint64_t n;
  double oa;
  double aa;
  double kappa;
} mhsi_report_summary;

/* Called after each epoch; has_val is 0 when the val mask is empty. */
typedef void (*mhsi_epoch_fn)(uint32_t epoch, double train_loss, int has_val, double val_oa, void* user);

MHSI_API const char* mhsi_version(void);
MHSI_API const char* mhsi_last_error(void);
MHSI_API void mhsi_string_free(char* s);

/* Scenes */
MHSI_API mhsi_status mhsi_scene_synth(uint32_t height, uint32_t width, uint32_t bands, uint32_t classes,
                                      float noise_sigma, uint64_t seed, mhsi_scene** out);
MHSI_API mhsi_status mhsi_scene_load(const char* path, mhsi_scene** out);
MHSI_API mhsi_status mhsi_scene_import_raw(const char* cube_path, const char* label_path, uint32_t height,
                                           uint32_t width, uint32_t bands, mhsi_scene** out);
MHSI_API mhsi_status mhsi_scene_save(const mhsi_scene* scene, const char* path);
MHSI_API mhsi_status mhsi_scene_info_get(const mhsi_scene* scene, mhsi_scene_info* out);
/* Rewrites the masks. Shortfall warnings are kept on the scene. */
MHSI_API mhsi_status mhsi_scene_split(mhsi_scene* scene, size_t n_train, size_t n_val, uint64_t seed);
/* Newline-separated warnings from the last split, or "" (owned by the scene). */
MHSI_API const char* mhsi_scene_warnings(const mhsi_scene* scene);
MHSI_API void mhsi_scene_free(mhsi_scene* scene);

/* Models */
MHSI_API void mhsi_config_default(mhsi_config* cfg);
MHSI_API mhsi_status mhsi_model_create(const mhsi_config* cfg, mhsi_model** out);
MHSI_API mhsi_status mhsi_model_load(const char* path, mhsi_model** out);
MHSI_API mhsi_status mhsi_model_save(const mhsi_model* model, const char* path);
MHSI_API mhsi_status mhsi_model_config(const mhsi_model* model, mhsi_config* out);
MHSI_API void mhsi_model_free(mhsi_model* model);

MHSI_API mhsi_status mhsi_train(mhsi_model* model, const mhsi_scene* scene, mhsi_epoch_fn on_epoch, void* user,
                                mhsi_train_summary* out);
/* Writes height*width 1-based classes into out (capacity out_len). */
MHSI_API mhsi_status mhsi_predict(const mhsi_model* model, const mhsi_scene* scene, uint16_t* out, size_t out_len);
MHSI_API mhsi_status mhsi_evaluate(const mhsi_model* model, const mhsi_scene* scene, mhsi_mask mask,
                                   mhsi_report** out);

/* Reports */
MHSI_API mhsi_status mhsi_report_summary_get(const mhsi_report* report, mhsi_report_summary* out);
/* Owned by the report. */
MHSI_API const char* mhsi_report_text(const mhsi_report* report);
MHSI_API const char* mhsi_report_json(const mhsi_report* report);
MHSI_API void mhsi_report_free(mhsi_report* report);

/* Rendering. palette_path may be NULL for the default palette of `classes`. */
MHSI_API mhsi_status mhsi_render_map(const uint16_t* raster, uint32_t height, uint32_t width, uint32_t classes,
                                     const char* palette_path, const char* out_path);

/* Complexity */
MHSI_API mhsi_status mhsi_flops_encoder_block(uint32_t height, uint32_t width, const mhsi_config* cfg,
                                              mhsi_block_kind kind, double* gflops);
/* CSV table; free *csv_out with mhsi_string_free. */
MHSI_API mhsi_status mhsi_bench(const size_t* sides, size_t n_sides, const mhsi_config* cfg, mhsi_block_kind kind,
                                size_t repeats, size_t attention_cap, char** csv_out);

MHSI_API mhsi_status mhsi_write_text_atomic(const char* path, const char* text);

#ifdef __cplusplus
}
#endif

#endif
