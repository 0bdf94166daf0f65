#ifndef LCCD_H
#define LCCD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Bit flags for [`LccdExtractorParams::channel_pairs`].
#define LCCD_PAIR_RG 1

#define LCCD_PAIR_RB 2

#define LCCD_PAIR_GB 4

typedef enum LccdStatus {
  LCCD_STATUS_OK = 0,
  LCCD_STATUS_NULL_POINTER = 1,
  LCCD_STATUS_INVALID_ARGUMENT = 2,
  LCCD_STATUS_INVALID_CONFIG = 3,
  LCCD_STATUS_FORMAT_ERROR = 4,
  LCCD_STATUS_IO_ERROR = 5,
  LCCD_STATUS_IMAGE_ERROR = 6,
  LCCD_STATUS_BUFFER_TOO_SMALL = 7,
  LCCD_STATUS_PANIC = 8,
} LccdStatus;

// Divergence selector for the `kind` arguments.
typedef enum LccdDivergenceKind {
  LCCD_DIVERGENCE_KIND_BHATTACHARYYA = 0,
  LCCD_DIVERGENCE_KIND_KL = 1,
  LCCD_DIVERGENCE_KIND_SYMMETRIC_KL = 2,
  LCCD_DIVERGENCE_KIND_HELLINGER = 3,
  LCCD_DIVERGENCE_KIND_TOTAL_VARIATION = 4,
  LCCD_DIVERGENCE_KIND_PEARSON = 5,
  // Uses the accompanying `alpha` argument.
  LCCD_DIVERGENCE_KIND_ALPHA = 6,
} LccdDivergenceKind;

// Opaque descriptors of one stream for one image.
typedef struct LccdDescriptorSet LccdDescriptorSet;

// Opaque extraction settings.
typedef struct LccdExtractor LccdExtractor;

// Opaque diagonal GMM.
typedef struct LccdGmm LccdGmm;

// Opaque PCA model.
typedef struct LccdPca LccdPca;

// Extraction parameters; fill with [`lccd_extractor_default_params`] first.
typedef struct LccdExtractorParams {
  uint32_t resize_width;
  uint32_t resize_height;
  uint32_t grid_rows;
  uint32_t grid_cols;
  uint32_t bins;
  uint32_t subspace_window;
  // An [`LccdDivergenceKind`] value.
  uint32_t divergence;
  double alpha;
  // `LCCD_PAIR_*` flags, compared in RG, RB, GB order.
  uint32_t channel_pairs;
} LccdExtractorParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *lccd_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the next call.
const char *lccd_last_error(void);

// Divergence between two probability vectors of length `len`.
//
// # Safety
// `p` and `q` must point to `len` readable doubles and `out` to one writable double.
enum LccdStatus lccd_divergence(uint32_t kind,
                                double alpha,
                                const double *p,
                                const double *q,
                                uintptr_t len,
                                double *out);

// Windowed divergences: `len - window + 1` values written to `out`.
//
// # Safety
// `p` and `q` must point to `len` readable doubles and `out` to `out_len` writable doubles.
enum LccdStatus lccd_subspace_divergence(uint32_t kind,
                                         double alpha,
                                         const double *p,
                                         const double *q,
                                         uintptr_t len,
                                         uintptr_t window,
                                         double *out,
                                         uintptr_t out_len);

// Writes the default parameters (470x380, 50x50 grid, 20 bins, window 3, Hellinger,
// RG and RB pairs).
//
// # Safety
// `out` must point to a writable `LccdExtractorParams`.
enum LccdStatus lccd_extractor_default_params(struct LccdExtractorParams *out);

// # Safety
// `params` must point to a valid `LccdExtractorParams`; `out` to a writable pointer.
enum LccdStatus lccd_extractor_new(const struct LccdExtractorParams *params,
                                   struct LccdExtractor **out);

// # Safety
// `extractor` must be NULL or a handle from [`lccd_extractor_new`] not yet freed.
void lccd_extractor_free(struct LccdExtractor *extractor);

// Output shape of an extractor. Any output pointer may be NULL.
//
// # Safety
// `extractor` must be a live handle; non-NULL outputs must be writable.
enum LccdStatus lccd_extractor_shape(const struct LccdExtractor *extractor,
                                     uintptr_t *spatial_dim,
                                     uintptr_t *channel_dim,
                                     uintptr_t *patch_rows,
                                     uintptr_t *patch_cols);

// Describes an interleaved 8-bit RGB buffer of `width * height * 3` bytes.
//
// # Safety
// `rgb` must point to `width * height * 3` readable bytes; the outputs must be writable.
enum LccdStatus lccd_extract_rgb(const struct LccdExtractor *extractor,
                                 const uint8_t *rgb,
                                 uintptr_t width,
                                 uintptr_t height,
                                 struct LccdDescriptorSet **spatial_out,
                                 struct LccdDescriptorSet **channel_out);

// Decodes a PNG, JPEG or raw image file and describes it.
//
// # Safety
// `path` must be a NUL-terminated string; the outputs must be writable.
enum LccdStatus lccd_extract_file(const struct LccdExtractor *extractor,
                                  const char *path,
                                  struct LccdDescriptorSet **spatial_out,
                                  struct LccdDescriptorSet **channel_out);

// Number of descriptors (patches) in the set; 0 for NULL.
//
// # Safety
// `set` must be NULL or a live handle.
uintptr_t lccd_descriptor_set_count(const struct LccdDescriptorSet *set);

// Values per descriptor; 0 for NULL.
//
// # Safety
// `set` must be NULL or a live handle.
uintptr_t lccd_descriptor_set_dim(const struct LccdDescriptorSet *set);

// `count * dim` floats, descriptor-major, patches in row-major order. Owned by the set.
//
// # Safety
// `set` must be NULL or a live handle.
const float *lccd_descriptor_set_data(const struct LccdDescriptorSet *set);

// # Safety
// `set` must be NULL or a live handle.
void lccd_descriptor_set_free(struct LccdDescriptorSet *set);

// Loads an `LCCDPCA1` model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum LccdStatus lccd_pca_load(const char *path, struct LccdPca **out);

// # Safety
// `pca` must be NULL or a live handle.
uintptr_t lccd_pca_output_dim(const struct LccdPca *pca);

// # Safety
// `pca` must be NULL or a live handle.
void lccd_pca_free(struct LccdPca *pca);

// Loads an `LCCDGMM1` model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum LccdStatus lccd_gmm_load(const char *path, struct LccdGmm **out);

// Length of a Fisher vector under this model: `2 * K * dim`; 0 for NULL.
//
// # Safety
// `gmm` must be NULL or a live handle.
uintptr_t lccd_gmm_fisher_dim(const struct LccdGmm *gmm);

// # Safety
// `gmm` must be NULL or a live handle.
void lccd_gmm_free(struct LccdGmm *gmm);

// Projects every descriptor of `set` with `pca` and writes the normalized Fisher vector.
//
// # Safety
// Handles must be live; `out` must point to `out_len` writable doubles.
enum LccdStatus lccd_fisher_vector(const struct LccdPca *pca,
                                   const struct LccdGmm *gmm,
                                   const struct LccdDescriptorSet *set,
                                   double *out,
                                   uintptr_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LCCD_H */
