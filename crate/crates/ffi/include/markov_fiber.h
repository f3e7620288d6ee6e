#ifndef MARKOV_FIBER_H
#define MARKOV_FIBER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_POINTER = 1,
  MF_STATUS_INVALID_ARGUMENT = 2,
  MF_STATUS_INVALID_TABLE = 3,
  MF_STATUS_INVALID_MODEL = 4,
  MF_STATUS_DIMENSION_MISMATCH = 5,
  MF_STATUS_NOT_NESTED = 6,
  MF_STATUS_INVALID_CHAIN = 7,
  MF_STATUS_FIBER_OVERFLOW = 8,
  MF_STATUS_NUMERICAL = 9,
  MF_STATUS_IO = 10,
  MF_STATUS_PANIC = 11,
} MfStatus;

/**
 * Test statistic selector.
 */
typedef enum MfStatistic {
  MF_STATISTIC_CHI2 = 0,
  MF_STATISTIC_G2 = 1,
  /**
   * Nested log-likelihood ratio; needs an alternative model.
   */
  MF_STATISTIC_LLR = 2,
} MfStatistic;

/**
 * Opaque model bound to a grid.
 */
typedef struct MfModel MfModel;

/**
 * Opaque contingency table.
 */
typedef struct MfTable MfTable;

typedef struct MfFit {
  double chi2;
  double g2;
  size_t df;
  size_t iterations;
  bool converged;
  double max_discrepancy;
} MfFit;

typedef struct MfChainOptions {
  uint64_t steps;
  uint64_t burn_in;
  uint64_t thin;
  uint64_t seed;
  /**
   * Independent chains seeded `seed, seed+1, …`; 0 is treated as 1.
   */
  uint32_t chains;
} MfChainOptions;

typedef struct MfPValue {
  double observed;
  double p_value;
  double std_error;
  double acceptance_rate;
  uint64_t samples;
} MfPValue;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *mf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mf_version(void);

/**
 * Builds a table from `rows * cols` row-major counts.
 *
 * # Safety
 * `counts` must point to `rows * cols` readable values; `out` must be
 * writable.
 */
enum MfStatus mf_table_new(size_t rows, size_t cols, const uint64_t *counts, struct MfTable **out);

/**
 * One of the embedded datasets, `"gilby"` or `"victoria"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum MfStatus mf_table_dataset(const char *name, struct MfTable **out);

/**
 * # Safety
 * `t` must be null or a handle from this library, not yet freed.
 */
void mf_table_free(struct MfTable *t);

/**
 * Grid shape and grand total of a table; any output may be null.
 *
 * # Safety
 * `t` must be a valid handle; non-null outputs must be writable.
 */
enum MfStatus mf_table_shape(const struct MfTable *t, size_t *rows, size_t *cols, uint64_t *total);

/**
 * Copies the row-major counts into `buf`, which holds `len` values.
 *
 * # Safety
 * `t` must be a valid handle and `buf` writable for `len` values.
 */
enum MfStatus mf_table_counts(const struct MfTable *t, uint64_t *buf, size_t len);

/**
 * Parses a JSON model spec and validates it on a `rows × cols` grid.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MfStatus mf_model_from_json(const char *json, size_t rows, size_t cols, struct MfModel **out);

/**
 * A built-in model (`"independence"`, `"changepoint-gilby"`,
 * `"common-blocks"`, `"own-blocks"`) on a `rows × cols` grid.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum MfStatus mf_model_named(const char *name, size_t rows, size_t cols, struct MfModel **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, not yet freed.
 */
void mf_model_free(struct MfModel *m);

/**
 * Residual degrees of freedom `R·C − rank A`.
 *
 * # Safety
 * `m` must be a valid handle and `out` writable.
 */
enum MfStatus mf_model_df(const struct MfModel *m, size_t *out);

/**
 * Fits `model` to `table`. When `expected` is non-null it receives the
 * `rows * cols` fitted means (row-major); `len` is its capacity.
 *
 * # Safety
 * Handles must be valid; `out` writable; `expected` null or writable for
 * `len` values.
 */
enum MfStatus mf_fit(const struct MfTable *table,
                     const struct MfModel *model,
                     double *expected,
                     size_t len,
                     struct MfFit *out);

/**
 * `2 Σ x log(m̂_outer / m̂_inner)` for nested `inner ⊂ outer`.
 *
 * # Safety
 * Handles must be valid and `out` writable.
 */
enum MfStatus mf_llr(const struct MfTable *table,
                     const struct MfModel *inner,
                     const struct MfModel *outer,
                     double *out);

/**
 * Monte Carlo conditional p-value from a Metropolis–Hastings walk on the
 * fiber of `table` under `null`. `alt` may be null unless `stat` is
 * `Llr`.
 *
 * # Safety
 * Handles must be valid (or null for `alt`); `opts` readable; `out`
 * writable.
 */
enum MfStatus mf_mcmc_pvalue(const struct MfTable *table,
                             const struct MfModel *null,
                             const struct MfModel *alt,
                             enum MfStatistic stat,
                             const struct MfChainOptions *opts,
                             struct MfPValue *out);

/**
 * Exact conditional p-value by enumerating the fiber (at most `cap`
 * members).
 *
 * # Safety
 * Handles must be valid (or null for `alt`); `out` writable.
 */
enum MfStatus mf_exact_pvalue(const struct MfTable *table,
                              const struct MfModel *null,
                              const struct MfModel *alt,
                              enum MfStatistic stat,
                              size_t cap,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARKOV_FIBER_H */
