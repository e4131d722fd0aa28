#ifndef VIMLAB_H
#define VIMLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum VimStatus {
  VIM_STATUS_OK = 0,
  VIM_STATUS_NULL_POINTER = 1,
  VIM_STATUS_INVALID_ARGUMENT = 2,
  VIM_STATUS_DIMENSION_MISMATCH = 3,
  VIM_STATUS_INVALID_CONFIG = 4,
  VIM_STATUS_IO = 5,
  VIM_STATUS_NUMERICAL = 6,
  VIM_STATUS_SAMPLER = 7,
  VIM_STATUS_UNSUPPORTED = 8,
  VIM_STATUS_INSUFFICIENT_DATA = 9,
  VIM_STATUS_PANIC = 10,
} VimStatus;

typedef enum VimLoss {
  VIM_LOSS_QUADRATIC = 0,
  VIM_LOSS_CROSS_ENTROPY = 1,
} VimLoss;

typedef enum VimTest {
  VIM_TEST_SIGN = 0,
  VIM_TEST_WILCOXON = 1,
  VIM_TEST_Z = 2,
} VimTest;

/**
 * Opaque dataset handle.
 */
typedef struct VimDataset VimDataset;

/**
 * Opaque fitted-model handle.
 */
typedef struct VimModel VimModel;

/**
 * Opaque importance-report handle.
 */
typedef struct VimReport VimReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *vim_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vim_version(void);

/**
 * Builds a dataset from a row-major `n x p` matrix and a length-`n` target.
 *
 * # Safety
 * `x` must point to `n * p` doubles, `y` to `n` doubles, and `out` to
 * writable storage for one pointer.
 */
enum VimStatus vim_dataset_new(const double *x,
                               const double *y,
                               size_t n,
                               size_t p,
                               struct VimDataset **out);

/**
 * # Safety
 * `d` must be null or a handle from [`vim_dataset_new`] not yet freed.
 */
void vim_dataset_free(struct VimDataset *d);

/**
 * # Safety
 * `d` must be a live dataset handle; `n` and `p` may be null.
 */
enum VimStatus vim_dataset_shape(const struct VimDataset *d, size_t *n, size_t *p);

/**
 * Fits a learner on every feature of `d`. `spec_json` is a predictor
 * specification such as `{"kind": "ols"}` or
 * `{"kind": "random_forest", "n_trees": 50, "seed": 3}`.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string, `d` a live dataset handle
 * and `out` writable.
 */
enum VimStatus vim_model_fit(const char *spec_json,
                             const struct VimDataset *d,
                             struct VimModel **out);

/**
 * # Safety
 * `m` must be null or a handle from [`vim_model_fit`] not yet freed.
 */
void vim_model_free(struct VimModel *m);

/**
 * Predictions for a row-major `n x p` matrix, written to `out[0..n]`.
 *
 * # Safety
 * `x` must hold `n * p` doubles and `out` room for `n` doubles.
 */
enum VimStatus vim_model_predict(const struct VimModel *m,
                                 const double *x,
                                 size_t n,
                                 size_t p,
                                 double *out);

/**
 * Runs one estimator.
 *
 * `method` is a method name (`"PFI"`, `"CFI"`, `"SobolCPI"`, `"LOCO"`,
 * `"LOCO_W"`, `"LOCI"`, `"cSAGE"`, `"cSAGEvf"`, `"mSAGE"`, `"mSAGEvf"`,
 * `"scSAGE"`, `"dTSI"`, `"GLM"`). `model` is the model fitted on `train`;
 * refitting methods refit its learner. `n_samples` is the permutation or
 * draw count (n_perm, n_draws or n_cal); `n_orderings` is used by cSAGE and
 * mSAGE only. Conditional methods use a Gaussian sampler fitted on `train`.
 * LOCO_W uses `train` and `test` stacked.
 *
 * # Safety
 * All handles must be live and `method` NUL-terminated; `out` writable.
 */
enum VimStatus vim_estimate(const char *method,
                            const struct VimModel *model,
                            const struct VimDataset *train,
                            const struct VimDataset *test,
                            enum VimLoss loss,
                            size_t n_samples,
                            size_t n_orderings,
                            uint64_t seed,
                            struct VimReport **out);

/**
 * # Safety
 * `r` must be null or a handle from [`vim_estimate`] not yet freed.
 */
void vim_report_free(struct VimReport *r);

/**
 * Number of features scored by the report.
 *
 * # Safety
 * `r` must be a live report handle and `p` writable.
 */
enum VimStatus vim_report_len(const struct VimReport *r, size_t *p);

/**
 * Raw scores, one per feature.
 *
 * # Safety
 * `out` must have room for `len` doubles, `len` equal to the report length.
 */
enum VimStatus vim_report_scores(const struct VimReport *r, double *out, size_t len);

/**
 * Standard errors, NaN where the method records none.
 *
 * # Safety
 * As [`vim_report_scores`].
 */
enum VimStatus vim_report_std_errors(const struct VimReport *r, double *out, size_t len);

/**
 * One-sided p-values of positive importance under the chosen test.
 *
 * # Safety
 * As [`vim_report_scores`].
 */
enum VimStatus vim_report_p_values(const struct VimReport *r,
                                   enum VimTest test,
                                   double *out,
                                   size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VIMLAB_H */
