#ifndef NRF_H
#define NRF_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible entry point.
 */
typedef enum NrfStatus {
  NRF_STATUS_OK = 0,
  NRF_STATUS_NULL_POINTER = 1,
  NRF_STATUS_INVALID_ARGUMENT = 2,
  NRF_STATUS_SHAPE_MISMATCH = 3,
  NRF_STATUS_IO = 4,
  NRF_STATUS_FORMAT = 5,
  NRF_STATUS_NUMERICAL = 6,
  NRF_STATUS_PANIC = 7,
} NrfStatus;

/**
 * Trained auxiliary generator.
 */
typedef struct NrfGenerator NrfGenerator;

/**
 * Trained potential network.
 */
typedef struct NrfPotential NrfPotential;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes, excluding
 * the terminator; an empty message means the last call succeeded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t nrf_last_error(char *buf, size_t len);

/**
 * Load a potential checkpoint. On success `*out` owns a new handle.
 *
 * # Safety
 * `path_utf8` must be a NUL-terminated string; `out` must be writable.
 */
enum NrfStatus nrf_potential_load(const char *path_utf8, struct NrfPotential **out);

/**
 * Release a potential handle. Null is ignored.
 *
 * # Safety
 * `pot` must come from `nrf_potential_load` and not be used afterwards.
 */
void nrf_potential_free(struct NrfPotential *pot);

/**
 * Input width, or 0 for a null handle.
 *
 * # Safety
 * `pot` must be null or a live handle.
 */
size_t nrf_potential_input_dim(const struct NrfPotential *pot);

/**
 * Number of output heads (classes), or 0 for a null handle.
 *
 * # Safety
 * `pot` must be null or a live handle.
 */
size_t nrf_potential_num_outputs(const struct NrfPotential *pot);

/**
 * Marginal potential `u(x)` of each of the `n` rows of `xs` (`n × dim`).
 * Higher means more normal, so this doubles as an anomaly score.
 *
 * # Safety
 * `xs` must hold `n * dim` values and `out` must have room for `n`.
 */
enum NrfStatus nrf_potential_score(const struct NrfPotential *pot,
                                   const double *xs,
                                   size_t n,
                                   size_t dim,
                                   double *out);

/**
 * Gradient of the marginal potential with respect to each input row,
 * written row-major into `out` (`n × dim`).
 *
 * # Safety
 * `xs` and `out` must each hold `n * dim` values.
 */
enum NrfStatus nrf_potential_grad_x(const struct NrfPotential *pot,
                                    const double *xs,
                                    size_t n,
                                    size_t dim,
                                    double *out);

/**
 * Load a generator checkpoint. On success `*out` owns a new handle.
 *
 * # Safety
 * `path_utf8` must be a NUL-terminated string; `out` must be writable.
 */
enum NrfStatus nrf_generator_load(const char *path_utf8, struct NrfGenerator **out);

/**
 * Release a generator handle. Null is ignored.
 *
 * # Safety
 * `gen` must come from `nrf_generator_load` and not be used afterwards.
 */
void nrf_generator_free(struct NrfGenerator *gen);

/**
 * # Safety
 * `gen` must be null or a live handle.
 */
size_t nrf_generator_latent_dim(const struct NrfGenerator *gen);

/**
 * # Safety
 * `gen` must be null or a live handle.
 */
size_t nrf_generator_obs_dim(const struct NrfGenerator *gen);

/**
 * Noise-free decode `g(h)` of `n` latent rows into `out` (`n × obs_dim`).
 *
 * # Safety
 * `hs` must hold `n * latent_dim` values and `out` `n * obs_dim`.
 */
enum NrfStatus nrf_generator_decode(const struct NrfGenerator *gen,
                                    const double *hs,
                                    size_t n,
                                    double *out);

/**
 * Draw `n` samples: ancestral proposals from the generator followed by
 * `steps` SGLD revision steps of size `delta` (`steps = 0` gives plain
 * generation). Chain `i` uses a random stream derived from `(seed, i)`,
 * so results do not depend on thread count. Writes `n × obs_dim` values.
 *
 * # Safety
 * Handles must be live; `out` must hold `n * obs_dim` values.
 */
enum NrfStatus nrf_sample(const struct NrfPotential *pot,
                          const struct NrfGenerator *gen,
                          size_t steps,
                          double delta,
                          size_t n,
                          uint64_t seed,
                          double *out);

/**
 * `KL(p ‖ q)` between two `dim`-variate Gaussians given by means and
 * row-major covariances.
 *
 * # Safety
 * Means must hold `dim` values, covariances `dim * dim`; `out` writable.
 */
enum NrfStatus nrf_kl_gaussians(size_t dim,
                                const double *mean_p,
                                const double *cov_p,
                                const double *mean_q,
                                const double *cov_q,
                                double *out);

/**
 * ROC AUC treating lower scores as anomalous; `is_anomaly[i]` is nonzero
 * for anomalies.
 *
 * # Safety
 * `scores` and `is_anomaly` must hold `n` values; `out` writable.
 */
enum NrfStatus nrf_roc_auc(const double *scores, const uint8_t *is_anomaly, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NRF_H */
