#ifndef IPSEG_IPSEG_H
#define IPSEG_IPSEG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define IPSEG_API __declspec(dllexport)
#else
#define IPSEG_API __attribute__((visibility("default")))
#endif

typedef enum ipseg_status {
    IPSEG_OK = 0,
    IPSEG_ERR_INVALID_ARGUMENT = 1,
    IPSEG_ERR_IO = 2,
    IPSEG_ERR_BAD_MAGIC = 3,
    IPSEG_ERR_UNSUPPORTED_DATATYPE = 4,
    IPSEG_ERR_DIM_UNSUPPORTED = 5,
    IPSEG_ERR_TRUNCATED = 6,
    IPSEG_ERR_NON_FINITE_DATA = 7,
    IPSEG_ERR_INVALID_LABEL = 8,
    IPSEG_ERR_AXIS_OUT_OF_RANGE = 9,
    IPSEG_ERR_AMBIGUOUS_ORIENTATION = 10,
    IPSEG_ERR_SHAPE_MISMATCH = 11,
    IPSEG_ERR_NON_INTEGRAL_OUTPUT = 12,
    IPSEG_ERR_WINDOW_TOO_LARGE = 13,
    IPSEG_ERR_DEGENERATE_BATCH = 14,
    IPSEG_ERR_NOT_SCALAR_LOSS = 15,
    IPSEG_ERR_CONFIG_INVALID = 16,
    IPSEG_ERR_INDIVISIBLE_INPUT = 17,
    IPSEG_ERR_EMPTY_CLASS_SET = 18,
    IPSEG_ERR_BAD_HYPERPARAMETERS = 19,
    IPSEG_ERR_SPEC_INVALID = 20,
    IPSEG_ERR_PAIR_MISSING = 21,
    IPSEG_ERR_DIMS_MISMATCH = 22,
    IPSEG_ERR_NON_FINITE_LOSS = 23,
    IPSEG_ERR_EMPTY_DATASET = 24,
    IPSEG_ERR_CONFIG_MISMATCH = 25,
    IPSEG_ERR_VERSION_UNSUPPORTED = 26,
    IPSEG_ERR_CORRUPT = 27,
    IPSEG_ERR_DUPLICATE_PIPELINE = 28,
    IPSEG_ERR_INTERNAL = 99
} ipseg_status;

/* Message of the last failed call on this thread ("" if none). */
IPSEG_API const char* ipseg_last_error(void);
IPSEG_API const char* ipseg_status_name(ipseg_status status);
IPSEG_API const char* ipseg_version(void);
/* Strings returned through char** out-parameters are owned by the caller. */
IPSEG_API void ipseg_string_free(char* s);
/* 0 = automatic (hardware concurrency). */
IPSEG_API ipseg_status ipseg_set_threads(int threads);
IPSEG_API int ipseg_get_threads(void);

/* ---- volumes and masks (x-fastest voxel order) ---- */

typedef struct ipseg_volume ipseg_volume;
typedef struct ipseg_mask ipseg_mask;

IPSEG_API ipseg_status ipseg_volume_read(const char* path, ipseg_volume** out);
IPSEG_API ipseg_status ipseg_volume_create(const int64_t dims[3], const float* data, ipseg_volume** out);
IPSEG_API ipseg_status ipseg_volume_write(const ipseg_volume* vol, const char* path);
IPSEG_API void ipseg_volume_dims(const ipseg_volume* vol, int64_t dims[3]);
IPSEG_API const float* ipseg_volume_data(const ipseg_volume* vol);
IPSEG_API void ipseg_volume_free(ipseg_volume* vol);

/* Header summary of a .nii/.nii.gz file as JSON. */
IPSEG_API ipseg_status ipseg_nifti_info(const char* path, char** json_out);

IPSEG_API ipseg_status ipseg_mask_read(const char* path, int num_classes, ipseg_mask** out);
IPSEG_API ipseg_status ipseg_mask_write(const ipseg_mask* mask, const char* path);
IPSEG_API void ipseg_mask_dims(const ipseg_mask* mask, int64_t dims[3]);
IPSEG_API const uint8_t* ipseg_mask_labels(const ipseg_mask* mask);
IPSEG_API int ipseg_mask_num_classes(const ipseg_mask* mask);
IPSEG_API void ipseg_mask_free(ipseg_mask* mask);

/* spec_json may be NULL or "{}" for the default 64x64x32 phantom. */
IPSEG_API ipseg_status ipseg_synth_phantom(const char* spec_json, ipseg_volume** vol_out, ipseg_mask** mask_out);

/* ---- intensity projections ---- */

typedef struct ipseg_ipimage ipseg_ipimage;

/* axis: "0", "1", "2", "sagittal", "coronal" or "axial"; mode: "eq1-literal" or "prose-lmip". */
IPSEG_API ipseg_status ipseg_project(const ipseg_volume* vol, const char* axis, double threshold, const char* mode, ipseg_ipimage** out);
IPSEG_API int ipseg_ipimage_channel_count(const ipseg_ipimage* img);
/* dims[0] is the fast (width) extent, dims[1] the slow (height) one. */
IPSEG_API void ipseg_ipimage_dims(const ipseg_ipimage* img, int64_t dims[2]);
IPSEG_API const float* ipseg_ipimage_channel(const ipseg_ipimage* img, int channel, const char** name);
/* Writes <prefix>_<channel>.nii per channel; the written paths come back as a JSON array. */
IPSEG_API ipseg_status ipseg_ipimage_write_nifti(const ipseg_ipimage* img, const char* prefix, char** paths_json);
IPSEG_API ipseg_status ipseg_ipimage_write_bin(const ipseg_ipimage* img, const char* path);
IPSEG_API void ipseg_ipimage_free(ipseg_ipimage* img);

/* ---- networks ---- */

/* kind: "ipunet", "unet2d_slice" or "unet3d"; spatial holds (H, W) or (D, H, W);
   as_json = 0 gives the text table. */
IPSEG_API ipseg_status ipseg_plan(const char* net_json, const char* kind, const int64_t* spatial, int n_spatial, int as_json, char** out);

/* ---- datasets, training, evaluation ---- */

typedef struct ipseg_dataset ipseg_dataset;
typedef struct ipseg_checkpoint ipseg_checkpoint;

/* {"source": "synthetic", "phantom": {...}, "count": 50, "split_ratio": 0.8, "split_seed": 0}
   or {"source": "nifti", "dir": "...", "num_classes": 3, ...}. */
IPSEG_API ipseg_status ipseg_dataset_create(const char* json, ipseg_dataset** out);
IPSEG_API void ipseg_dataset_counts(const ipseg_dataset* ds, int* train, int* test);
IPSEG_API void ipseg_dataset_free(ipseg_dataset* ds);

typedef void (*ipseg_epoch_callback)(int epoch, double loss, double seconds, void* user);

/* run_json: {"net": {...}, "hyper": {...}}; pipeline: "ip", "slice2d" or "vol3d".
   resume, callback and history_csv may be NULL. */
IPSEG_API ipseg_status ipseg_train(const char* pipeline, const char* run_json, const ipseg_dataset* ds, const ipseg_checkpoint* resume,
                                   ipseg_epoch_callback callback, void* user, ipseg_checkpoint** out, char** history_csv);
IPSEG_API ipseg_status ipseg_checkpoint_save(const ipseg_checkpoint* ck, const char* path);
IPSEG_API ipseg_status ipseg_checkpoint_load(const char* path, ipseg_checkpoint** out);
/* Pipeline, configs, epoch and tensor inventory as JSON. */
IPSEG_API ipseg_status ipseg_checkpoint_info(const ipseg_checkpoint* ck, char** json_out);
IPSEG_API void ipseg_checkpoint_free(ipseg_checkpoint* ck);

/* Scores the test split. csv_line (may be NULL) is "Recall,Precision,DSC" values. */
IPSEG_API ipseg_status ipseg_evaluate(const ipseg_checkpoint* ck, const ipseg_dataset* ds, char** report_json, char** csv_line);

/* pipelines: comma-separated, e.g. "ip,vol3d". Either output may be NULL. */
IPSEG_API ipseg_status ipseg_bench(const char* pipelines, const char* run_json, const ipseg_dataset* ds, int repeats, char** report_json,
                                   char** csv);

#ifdef __cplusplus
}
#endif

#endif
