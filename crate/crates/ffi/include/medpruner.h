#ifndef MEDPRUNER_H
#define MEDPRUNER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum MpStatus {
  MP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MP_STATUS_NULL_POINTER = 1,
  /**
   * Out-of-range configuration value.
   */
  MP_STATUS_CONFIG = 2,
  /**
   * Malformed input data or file contents.
   */
  MP_STATUS_INVALID = 3,
  /**
   * Filesystem failure.
   */
  MP_STATUS_IO = 4,
  /**
   * The caller's buffer is too small; the required length was still written.
   */
  MP_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * Internal panic. The handle arguments should be considered unusable.
   */
  MP_STATUS_PANIC = 6,
} MpStatus;

/**
 * Opaque pruning result handle.
 */
typedef struct MpResult MpResult;

/**
 * Opaque volume handle.
 */
typedef struct MpVolume MpVolume;

/**
 * Pipeline parameters. Obtain defaults from [`mp_config_default`].
 */
typedef struct MpConfig {
  double gamma;
  double tau;
  double temperature;
  double contextual_ratio;
  size_t patch_size;
  size_t embed_dim;
  size_t num_heads;
  size_t head_dim;
} MpConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if it succeeded.
 * The pointer stays valid until the next call on the same thread.
 */
const char *mp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mp_version(void);

struct MpConfig mp_config_default(void);

/**
 * Defaults with the given patch size and an embedding width of its square.
 */
struct MpConfig mp_config_with_patch_size(size_t patch_size);

/**
 * Reads an MPRV volume file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MpStatus mp_volume_read(const char *path, struct MpVolume **out);

/**
 * Copies `len` voxels laid out depth-major, then rows, then columns.
 *
 * # Safety
 * `data` must point to `len` floats and `out` must be a valid pointer.
 */
enum MpStatus mp_volume_from_data(size_t depth,
                                  size_t height,
                                  size_t width,
                                  const float *data,
                                  size_t len,
                                  struct MpVolume **out);

/**
 * Writes the volume dimensions. Any output pointer may be null.
 *
 * # Safety
 * `vol` must be a live handle; non-null outputs must be valid.
 */
enum MpStatus mp_volume_shape(const struct MpVolume *vol,
                              size_t *depth,
                              size_t *height,
                              size_t *width);

/**
 * # Safety
 * `vol` must be null or a handle not yet freed.
 */
void mp_volume_free(struct MpVolume *vol);

/**
 * Slice filtering alone. Retained indices go to `buf`; `*len` always receives
 * the count, so a call with `cap = 0` can size the buffer.
 *
 * # Safety
 * `vol` must be a live handle, `buf` must hold `cap` entries and `len` must be valid.
 */
enum MpStatus mp_iaf_filter(const struct MpVolume *vol,
                            double gamma,
                            size_t *buf,
                            size_t cap,
                            size_t *len);

/**
 * Runs the full pipeline. `attention_path` may be null to use the built-in
 * patch encoder.
 *
 * # Safety
 * `vol` must be a live handle, `cfg` and `out` valid pointers, and
 * `attention_path` null or NUL-terminated.
 */
enum MpStatus mp_prune(const struct MpVolume *vol,
                       const struct MpConfig *cfg,
                       const char *attention_path,
                       struct MpResult **out);

/**
 * Retention rate of a result, or NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
double mp_result_r_rate(const struct MpResult *res);

/**
 * Token and slice counts. Any output pointer may be null.
 *
 * # Safety
 * `res` must be a live handle; non-null outputs must be valid.
 */
enum MpStatus mp_result_counts(const struct MpResult *res,
                               size_t *original_tokens,
                               size_t *retained_tokens,
                               size_t *retained_slices);

/**
 * Copies retained slice indices, sized like [`mp_iaf_filter`].
 *
 * # Safety
 * `res` must be a live handle, `buf` must hold `cap` entries and `len` must be valid.
 */
enum MpStatus mp_result_retained_slices(const struct MpResult *res,
                                        size_t *buf,
                                        size_t cap,
                                        size_t *len);

/**
 * Copies the primary token indices of the `slot`-th retained slice.
 *
 * # Safety
 * `res` must be a live handle, `buf` must hold `cap` entries and `len` must be valid.
 */
enum MpStatus mp_result_primary_tokens(const struct MpResult *res,
                                       size_t slot,
                                       size_t *buf,
                                       size_t cap,
                                       size_t *len);

/**
 * Writes the JSON report and its sibling contextual-token file.
 *
 * # Safety
 * `res` must be a live handle and `path` NUL-terminated.
 */
enum MpStatus mp_result_write_json(const struct MpResult *res,
                                   const char *path,
                                   bool include_timings);

/**
 * # Safety
 * `res` must be null or a handle not yet freed.
 */
void mp_result_free(struct MpResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEDPRUNER_H */
