#ifndef VOXDX_H
#define VOXDX_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VoxdxStatus {
  VOXDX_STATUS_OK = 0,
  VOXDX_STATUS_NULL_POINTER = 1,
  VOXDX_STATUS_CONFIG = 2,
  VOXDX_STATUS_DATA = 3,
  VOXDX_STATUS_CONVERGENCE = 4,
  VOXDX_STATUS_IO = 5,
  VOXDX_STATUS_BUFFER_TOO_SMALL = 6,
  VOXDX_STATUS_INVALID_UTF8 = 7,
  VOXDX_STATUS_PANIC = 8,
} VoxdxStatus;

// Opaque handle to a loaded model.
typedef struct VoxdxModel VoxdxModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *voxdx_version(void);

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *voxdx_last_error_message(void);

// Static name of class `label` (`normal`, `neoplasm`, `phonotrauma`,
// `vocal_palsy`), or NULL when out of range.
const char *voxdx_label_name(uint32_t label);

// `0.4 * sensitivity + 0.2 * specificity + 0.4 * recall`.
double voxdx_weighted_score(double sensitivity, double specificity, double recall);

// Load a model file. On success `*out` owns a handle to release with
// [`voxdx_model_free`].
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum VoxdxStatus voxdx_model_load(const char *path, struct VoxdxModel **out);

// Release a handle from [`voxdx_model_load`]. NULL is ignored.
//
// # Safety
// `model` must come from [`voxdx_model_load`] and not be freed twice.
void voxdx_model_free(struct VoxdxModel *model);

// Length of the feature vector the model expects (3d), or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t voxdx_model_feature_dim(const struct VoxdxModel *model);

// Classify a precomputed feature vector; writes the class code to `*label`.
//
// # Safety
// `features` must point to `len` readable doubles; other pointers valid.
enum VoxdxStatus voxdx_model_predict_features(const struct VoxdxModel *model,
                                              const double *features,
                                              size_t len,
                                              uint32_t *label);

// Decode WAV bytes, extract features with the model's settings and classify.
//
// # Safety
// `wav` must point to `len` readable bytes; other pointers valid.
enum VoxdxStatus voxdx_model_predict_wav(const struct VoxdxModel *model,
                                         const uint8_t *wav,
                                         size_t len,
                                         uint32_t *label);

// Extract the `3 * n_mfcc` feature vector of a WAV file image with default
// settings. `*written` receives the required length even when `out_len` is
// too small (status `BufferTooSmall`).
//
// # Safety
// `wav` must point to `wav_len` bytes and `out` to `out_len` writable doubles.
enum VoxdxStatus voxdx_extract_wav(const uint8_t *wav,
                                   size_t wav_len,
                                   size_t n_mfcc,
                                   double *out,
                                   size_t out_len,
                                   size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOXDX_H */
