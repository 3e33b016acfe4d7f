#ifndef AGLQ_H
#define AGLQ_H

#pragma once

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AglqStatus {
  AGLQ_STATUS_OK = 0,
  AGLQ_STATUS_NULL_POINTER = 1,
  AGLQ_STATUS_INVALID_SPEC = 2,
  AGLQ_STATUS_DOMAIN = 3,
  AGLQ_STATUS_DEGENERATE_SAMPLE = 4,
  AGLQ_STATUS_DIMENSION_MISMATCH = 5,
  AGLQ_STATUS_ILL_CONDITIONED = 6,
  AGLQ_STATUS_RANK_DEFICIENT = 7,
  AGLQ_STATUS_EMPTY_ACTIVE_SET = 8,
  AGLQ_STATUS_STEP_UNDERFLOW = 9,
  AGLQ_STATUS_DATA = 10,
  AGLQ_STATUS_IO = 11,
  /**
   * Output buffer shorter than required.
   */
  AGLQ_STATUS_BUFFER_TOO_SMALL = 12,
  AGLQ_STATUS_PANIC = 13,
} AglqStatus;

/**
 * Opaque grouped design matrix.
 */
typedef struct AglqDesign AglqDesign;

/**
 * Opaque result of one adaptive fit.
 */
typedef struct AglqFit AglqFit;

/**
 * Estimator settings. Start from [`aglq_options_default`].
 */
typedef struct AglqOptions {
  /**
   * Asymmetry index in (0, 1); NaN estimates it from the response.
   */
  double tau;
  /**
   * Estimate tau on the raw response instead of the standardized one.
   */
  bool tau_raw;
  /**
   * Loss exponent, >= 1.
   */
  double q;
  /**
   * Adaptive-weight exponent, > 0.
   */
  double gamma;
  /**
   * Penalty level; NaN uses `n^(-1/2 - gamma/4)`.
   */
  double lambda;
  /**
   * Weight cap; NaN pins zero pilot groups instead.
   */
  double weight_cap;
  size_t max_iter;
  double tol_kkt;
  /**
   * Also compute standard errors of the active coefficients.
   */
  bool std_errors;
} AglqOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next call on the same thread.
 */
const char *aglq_last_error(void);

/**
 * Library version, static storage.
 */
const char *aglq_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void aglq_string_free(char *s);

/**
 * `rho_tau(u; q)`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum AglqStatus aglq_rho(double u, double tau, double q, double *out);

/**
 * Score `g(eps) = -rho'(eps)`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum AglqStatus aglq_g(double eps, double tau, double q, double *out);

/**
 * Curvature `h(eps) = rho''(eps)`, floored at `floor` near zero for `q < 2`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum AglqStatus aglq_h(double eps, double tau, double q, double floor, double *out);

/**
 * Asymmetry index of a sample. `raw != 0` skips standardization.
 *
 * # Safety
 * `sample` must hold `len` values; `out` must be valid for one write.
 */
enum AglqStatus aglq_estimate_tau(const double *sample, size_t len, bool raw, double *out);

/**
 * `lambda_n = n^(-1/2 - gamma/4)`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum AglqStatus aglq_lambda_schedule(size_t n, double gamma, double *out);

/**
 * Evaluates the rate conditions of a regime given as JSON
 * (`{"c":..,"alpha":..,"gamma":..,"lambda_exponent":..}`) and stores a JSON
 * report in `*out`, to be released with [`aglq_string_free`].
 *
 * # Safety
 * `regime_json` must be a nul-terminated string; `out` valid for one write.
 */
enum AglqStatus aglq_check_conditions(const char *regime_json, char **out);

/**
 * Builds a design from a row-major `n x r` matrix and `p` group sizes
 * summing to `r`.
 *
 * # Safety
 * `x` must hold `n * r` values and `group_sizes` `p` values; `out` must be
 * valid for one write.
 */
enum AglqStatus aglq_design_new(const double *x,
                                size_t n,
                                size_t r,
                                const size_t *group_sizes,
                                size_t p,
                                struct AglqDesign **out);

/**
 * # Safety
 * `design` must come from [`aglq_design_new`] and not be freed twice.
 */
void aglq_design_free(struct AglqDesign *design);

/**
 * # Safety
 * `design` must be null or a live handle.
 */
size_t aglq_design_rows(const struct AglqDesign *design);

/**
 * # Safety
 * `design` must be null or a live handle.
 */
size_t aglq_design_columns(const struct AglqDesign *design);

/**
 * # Safety
 * `design` must be null or a live handle.
 */
size_t aglq_design_groups(const struct AglqDesign *design);

struct AglqOptions aglq_options_default(void);

/**
 * Pilot fit, adaptive weights and the penalized fit. A fit that hits the
 * iteration limit is still returned; check [`aglq_fit_converged`].
 *
 * # Safety
 * `design` must be a live handle, `y` must hold `n` values, `opts` may be
 * null for the defaults and `out` must be valid for one write.
 */
enum AglqStatus aglq_fit(const struct AglqDesign *design,
                         const double *y,
                         size_t n,
                         const struct AglqOptions *opts,
                         struct AglqFit **out);

/**
 * # Safety
 * `fit` must come from [`aglq_fit`] and not be freed twice.
 */
void aglq_fit_free(struct AglqFit *fit);

/**
 * Number of coefficients `r`.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
size_t aglq_fit_len(const struct AglqFit *fit);

/**
 * Number of selected groups.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
size_t aglq_fit_active_len(const struct AglqFit *fit);

/**
 * # Safety
 * `fit` must be null or a live handle.
 */
bool aglq_fit_converged(const struct AglqFit *fit);

/**
 * # Safety
 * `fit` must be null or a live handle.
 */
bool aglq_fit_pilot_converged(const struct AglqFit *fit);

/**
 * # Safety
 * `fit` must be null or a live handle.
 */
size_t aglq_fit_iterations(const struct AglqFit *fit);

/**
 * Objective, KKT residual, tau and lambda; NaN for a null handle.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
double aglq_fit_objective(const struct AglqFit *fit);

/**
 * # Safety
 * `fit` must be null or a live handle.
 */
double aglq_fit_kkt_residual(const struct AglqFit *fit);

/**
 * # Safety
 * `fit` must be null or a live handle.
 */
double aglq_fit_tau(const struct AglqFit *fit);

/**
 * # Safety
 * `fit` must be null or a live handle.
 */
double aglq_fit_lambda(const struct AglqFit *fit);

/**
 * Copies the `r` coefficients into `out`.
 *
 * # Safety
 * `fit` must be a live handle and `out` must hold `len` values.
 */
enum AglqStatus aglq_fit_coefficients(const struct AglqFit *fit, double *out, size_t len);

/**
 * Copies the 0-based indices of the selected groups into `out`.
 *
 * # Safety
 * `fit` must be a live handle and `out` must hold `len` values.
 */
enum AglqStatus aglq_fit_active(const struct AglqFit *fit, size_t *out, size_t len);

/**
 * Copies `r` standard errors into `out`; NaN for inactive columns.
 * Fails with `EmptyActiveSet` when nothing was selected or standard errors
 * were not requested.
 *
 * # Safety
 * `fit` must be a live handle and `out` must hold `len` values.
 */
enum AglqStatus aglq_fit_std_errors(const struct AglqFit *fit, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AGLQ_H */
