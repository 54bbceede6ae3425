#ifndef WMPROP_H
#define WMPROP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum {
  WM_STATUS_OK = 0,
  WM_STATUS_NULL_POINTER = 1,
  WM_STATUS_EMPTY_DATASET = 2,
  WM_STATUS_DOMAIN = 3,
  WM_STATUS_DEGENERATE = 4,
  WM_STATUS_NON_IDENTIFIABLE = 5,
  WM_STATUS_CONVERGENCE = 6,
  WM_STATUS_PARSE = 7,
  WM_STATUS_IO = 8,
  /**
   * The output buffer is too small; the required length was written.
   */
  WM_STATUS_BUFFER_TOO_SMALL = 9,
  WM_STATUS_PANIC = 10,
} WmStatus;

typedef enum {
  WM_SCHEME_GUMBEL = 0,
  WM_SCHEME_INVERSE = 1,
  WM_SCHEME_GREEN_RED = 2,
} WmScheme;

typedef struct WmDensityRatio WmDensityRatio;

typedef struct WmEcdf WmEcdf;

typedef struct WmEstimator WmEstimator;

/**
 * Estimator settings. `deltas` may be null when `n_deltas` is 0, in which
 * case the default thresholds are used.
 */
typedef struct {
  const double *deltas;
  size_t n_deltas;
  double eps_min;
  size_t bins;
  bool mc_parity;
  size_t mc_n;
  uint64_t mc_seed;
} WmEstimatorConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *wm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wm_version(void);

WmEstimatorConfig wm_estimator_config_default(void);

/**
 * # Safety
 * `samples` must be valid for `n` reads; `out` must be writable.
 */
WmStatus wm_ecdf_new(const double *samples, size_t n, WmEcdf **out);

/**
 * # Safety
 * `ecdf` must come from [`wm_ecdf_new`]; `out` must be writable.
 */
WmStatus wm_ecdf_query(const WmEcdf *ecdf, double x, double *out);

/**
 * # Safety
 * `ecdf` must be null or come from [`wm_ecdf_new`].
 */
size_t wm_ecdf_len(const WmEcdf *ecdf);

/**
 * # Safety
 * `ecdf` must be null or come from [`wm_ecdf_new`], and not be used again.
 */
void wm_ecdf_free(WmEcdf *ecdf);

/**
 * Histogram density of watermarked samples on `[0, 1]` with `bins` bins.
 *
 * # Safety
 * `samples` must be valid for `n` reads; `out` must be writable.
 */
WmStatus wm_density_ratio_fit(const double *samples, size_t n, size_t bins, WmDensityRatio **out);

/**
 * # Safety
 * `ratio` must come from [`wm_density_ratio_fit`]; `out` must be writable.
 */
WmStatus wm_density_ratio_eval(const WmDensityRatio *ratio, double x, double *out);

/**
 * # Safety
 * `ratio` must be null or come from [`wm_density_ratio_fit`], and not be
 * used again.
 */
void wm_density_ratio_free(WmDensityRatio *ratio);

/**
 * Copies the data and the watermarked reference and fits the density
 * ratio. `cfg` may be null for the defaults.
 *
 * # Safety
 * `data` and `reference` must be valid for `n_data` and `n_reference`
 * reads; `cfg` must be null or valid; `out` must be writable.
 */
WmStatus wm_estimator_new(const double *data,
                          size_t n_data,
                          const double *reference,
                          size_t n_reference,
                          const WmEstimatorConfig *cfg,
                          WmEstimator **out);

/**
 * # Safety
 * `est` must come from [`wm_estimator_new`]; `out` must be writable.
 */
WmStatus wm_estimator_ini(const WmEstimator *est, double delta, double *out);

/**
 * # Safety
 * `est` must come from [`wm_estimator_new`]; `out` must be writable.
 */
WmStatus wm_estimator_rfn(const WmEstimator *est, double delta, double *out);

/**
 * Fixed-point estimate. `residual` may be null.
 *
 * # Safety
 * `est` must come from [`wm_estimator_new`]; `eps` must be writable and
 * `residual` null or writable.
 */
WmStatus wm_estimator_opt(const WmEstimator *est, double *eps, double *residual);

/**
 * Full report as a JSON string, released with [`wm_string_free`].
 *
 * # Safety
 * `est` must come from [`wm_estimator_new`]; `out` must be writable.
 */
WmStatus wm_estimator_report_json(const WmEstimator *est, char **out);

/**
 * # Safety
 * `est` must be null or come from [`wm_estimator_new`], and not be used
 * again.
 */
void wm_estimator_free(WmEstimator *est);

/**
 * # Safety
 * `s` must be null or a string returned by this library, and not be used
 * again.
 */
void wm_string_free(char *s);

/**
 * Large-sample limit `(eps, mu)` of the regularized binary MLE.
 *
 * # Safety
 * `eps` and `mu` must be writable.
 */
WmStatus wm_limit_solution(double e_hat, double gamma, double *eps, double *mu);

/**
 * # Safety
 * `eps` and `mu` must be writable; `no_evidence` null or writable.
 */
WmStatus wm_regularized_mle(double e_hat,
                            double gamma,
                            double lambda,
                            double *eps,
                            double *mu,
                            bool *no_evidence);

/**
 * Post-PIT pivotal statistics of `tokens` under a 32-byte key with context
 * window `m`. Writes `n_tokens - m` values to `out` when `capacity`
 * allows; `out_len` always receives the required length. `gamma` and
 * `gr_delta` are read only for the green-red scheme.
 *
 * # Safety
 * `tokens` must be valid for `n_tokens` reads, `key` for 32 reads, `out`
 * for `capacity` writes (or null when `capacity` is 0), and `out_len`
 * writable.
 */
WmStatus wm_pivotal_sequence(const uint32_t *tokens,
                             size_t n_tokens,
                             size_t vocab,
                             const uint8_t *key,
                             size_t m,
                             WmScheme scheme,
                             double gamma,
                             double gr_delta,
                             double *out,
                             size_t capacity,
                             size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WMPROP_H */
