#ifndef EXTREMEQ_H
#define EXTREMEQ_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum ExqStatus {
  EXQ_STATUS_OK = 0,
  EXQ_STATUS_NULL_POINTER = 1,
  EXQ_STATUS_DOMAIN = 2,
  EXQ_STATUS_INSUFFICIENT_DATA = 3,
  EXQ_STATUS_DEGENERATE_SAMPLE = 4,
  EXQ_STATUS_CONVERGENCE = 5,
  EXQ_STATUS_AGGREGATION = 6,
  EXQ_STATUS_INVALID_STRING = 7,
  EXQ_STATUS_PANIC = 8,
} ExqStatus;

/**
 * Model families accepted by [`exq_quantile_model_fit`].
 */
typedef enum ExqModelKind {
  EXQ_MODEL_KIND_CONSTANT = 0,
  EXQ_MODEL_KIND_LINEAR = 1,
  EXQ_MODEL_KIND_MLP = 2,
} ExqModelKind;

/**
 * Fitted conditional quantile model.
 */
typedef struct ExqQuantileModel ExqQuantileModel;

/**
 * Finite real sample.
 */
typedef struct ExqSample ExqSample;

/**
 * Fitted peaks-over-threshold model.
 */
typedef struct ExqTailModel ExqTailModel;

/**
 * Plain-data view of a tail model.
 */
typedef struct ExqTailSummary {
  double u;
  double zeta_u;
  double sigma;
  double xi;
  double log_likelihood;
  size_t n_exc;
  size_t n;
  bool boundary;
} ExqTailSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *exq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *exq_version(void);

/**
 * Copies `len` values into a new sample.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum ExqStatus exq_sample_new(const double *values, size_t len, struct ExqSample **out);

/**
 * # Safety
 * `sample` must be null or a handle from [`exq_sample_new`] not yet freed.
 */
void exq_sample_free(struct ExqSample *sample);

/**
 * Number of observations, or 0 for a null handle.
 *
 * # Safety
 * `sample` must be null or a live handle.
 */
size_t exq_sample_len(const struct ExqSample *sample);

/**
 * Left-continuous empirical `tau`-quantile.
 *
 * # Safety
 * `sample` must be a live handle; `out` must be writable.
 */
enum ExqStatus exq_empirical_quantile(const struct ExqSample *sample, double tau, double *out);

/**
 * Fits a GP tail above the empirical `level`-quantile (0 uses the minimum).
 *
 * # Safety
 * `sample` must be a live handle; `out` must be writable.
 */
enum ExqStatus exq_fit_tail(const struct ExqSample *sample,
                            double level,
                            struct ExqTailModel **out);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum ExqStatus exq_tail_model_summary(const struct ExqTailModel *model, struct ExqTailSummary *out);

/**
 * Extrapolated `tau`-quantile of a fitted tail.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum ExqStatus exq_tail_quantile(const struct ExqTailModel *model, double tau, double *out);

/**
 * # Safety
 * `model` must be null or a handle from [`exq_fit_tail`] not yet freed.
 */
void exq_tail_model_free(struct ExqTailModel *model);

/**
 * POT extrapolation from explicit parameters.
 *
 * # Safety
 * `out` must be writable.
 */
enum ExqStatus exq_gp_quantile(double u,
                               double zeta_u,
                               double sigma,
                               double xi,
                               double tau,
                               double *out);

/**
 * True quantile of a named study distribution (`normal01`, `gamma4`,
 * `lognormal01`, `frechet3`, `gp(σ,ξ)`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum ExqStatus exq_true_quantile(const char *name, double tau, double *out);

/**
 * Fits a pinball-loss model to `n` rows of `q` covariates (row-major `x`)
 * and responses `y`. `q` may be 0 for an unconditional constant fit.
 *
 * # Safety
 * `x` must hold `n * q` doubles, `y` must hold `n`; `out` must be writable.
 */
enum ExqStatus exq_quantile_model_fit(const double *x,
                                      size_t n,
                                      size_t q,
                                      const double *y,
                                      double tau,
                                      enum ExqModelKind kind,
                                      uint64_t seed,
                                      struct ExqQuantileModel **out);

/**
 * Prediction at one covariate vector of length `q`.
 *
 * # Safety
 * `model` must be a live handle, `x` must hold `q` doubles, `out` writable.
 */
enum ExqStatus exq_quantile_model_predict(const struct ExqQuantileModel *model,
                                          const double *x,
                                          size_t q,
                                          double *out);

/**
 * Mean pinball loss on the training data.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum ExqStatus exq_quantile_model_train_loss(const struct ExqQuantileModel *model, double *out);

/**
 * # Safety
 * `model` must be null or a handle from [`exq_quantile_model_fit`] not yet freed.
 */
void exq_quantile_model_free(struct ExqQuantileModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXTREMEQ_H */
