#ifndef AQEM_H
#define AQEM_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AqemStatus {
  AQEM_STATUS_OK = 0,
  AQEM_STATUS_NULL_POINTER = 1,
  AQEM_STATUS_INVALID_ARGUMENT = 2,
  AQEM_STATUS_PRECISION = 3,
  AQEM_STATUS_ZERO_PROBABILITY = 4,
  AQEM_STATUS_FLAT_POSTERIOR = 5,
  AQEM_STATUS_INVALID_NOISE = 6,
  AQEM_STATUS_PARSE = 7,
  AQEM_STATUS_MISSING_POLICY = 8,
  AQEM_STATUS_IO = 9,
  AQEM_STATUS_RESOURCE = 10,
  AQEM_STATUS_PANIC = 11,
} AqemStatus;

typedef enum AqemProbe {
  /**
   * Minimum-variance sine state.
   */
  AQEM_PROBE_SINE = 0,
  /**
   * All photons in the same single-photon state.
   */
  AQEM_PROBE_PRODUCT = 1,
} AqemProbe;

typedef enum AqemNoiseModel {
  AQEM_NOISE_MODEL_NONE = 0,
  AQEM_NOISE_MODEL_NORMAL = 1,
  AQEM_NOISE_MODEL_RANDOM_TELEGRAPH = 2,
  AQEM_NOISE_MODEL_SKEW_NORMAL = 3,
  AQEM_NOISE_MODEL_LOG_NORMAL = 4,
} AqemNoiseModel;

/**
 * Bayesian filter state.
 */
typedef struct AqemBayes AqemBayes;

/**
 * Trained Markov feedback policy.
 */
typedef struct AqemPolicy AqemPolicy;

/**
 * Permutation-symmetric probe state.
 */
typedef struct AqemState AqemState;

typedef struct AqemNoise {
  enum AqemNoiseModel model;
  double variance;
  double skewness;
} AqemNoise;

typedef struct AqemEstimate {
  double sharpness;
  double holevo;
  double holevo_se;
  size_t trials;
  uint64_t aborts;
} AqemEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the buffer size needed for the
 * whole message; 1 when there is no error.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t aqem_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aqem_version(void);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum AqemStatus aqem_state_new(enum AqemProbe probe, size_t n, struct AqemState **out);

/**
 * # Safety
 * `state` must be null or a handle from this library not yet freed.
 */
void aqem_state_free(struct AqemState *state);

/**
 * Undetected photons left in the state; 0 for a null handle.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
size_t aqem_state_remaining(const struct AqemState *state);

/**
 * Probability that the next photon leaves through `outcome` (0 or 1) when
 * the single-photon rotation angle is `theta`.
 *
 * # Safety
 * `state` must be a live handle and `out` valid for a write.
 */
enum AqemStatus aqem_state_detection_probability(const struct AqemState *state,
                                                 double theta,
                                                 uint32_t outcome,
                                                 double *out);

/**
 * Normalized state after detecting one photon in `outcome`; a new handle.
 *
 * # Safety
 * `state` must be a live handle and `out` valid for a write.
 */
enum AqemStatus aqem_state_collapse(const struct AqemState *state,
                                    double theta,
                                    uint32_t outcome,
                                    struct AqemState **out);

/**
 * Bayesian filter primed with the `n`-photon sine state.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum AqemStatus aqem_bayes_new(size_t n, struct AqemBayes **out);

/**
 * # Safety
 * `bayes` must be null or a live handle.
 */
void aqem_bayes_free(struct AqemBayes *bayes);

/**
 * Condition the filter on one detection, in place. The handle is left
 * unchanged on failure.
 *
 * # Safety
 * `bayes` must be a live handle.
 */
enum AqemStatus aqem_bayes_update(struct AqemBayes *bayes, double feedback, uint32_t outcome);

/**
 * Feedback phase maximizing the expected sharpness after the next photon.
 *
 * # Safety
 * `bayes` must be a live handle and `out` valid for a write.
 */
enum AqemStatus aqem_bayes_optimal_phase(const struct AqemBayes *bayes, double *out);

/**
 * Mean direction of the current posterior.
 *
 * # Safety
 * `bayes` must be a live handle and `out` valid for a write.
 */
enum AqemStatus aqem_bayes_estimate(const struct AqemBayes *bayes, double *out);

/**
 * Parse a policy file's JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid for a write.
 */
enum AqemStatus aqem_policy_from_json(const char *json, struct AqemPolicy **out);

/**
 * # Safety
 * `policy` must be null or a live handle.
 */
void aqem_policy_free(struct AqemPolicy *policy);

/**
 * Photon number the policy was trained for; 0 for a null handle.
 *
 * # Safety
 * `policy` must be null or a live handle.
 */
size_t aqem_policy_photons(const struct AqemPolicy *policy);

/**
 * Feedback phase after the `m`-th detection (1-based).
 *
 * # Safety
 * `policy` must be a live handle and `out` valid for a write.
 */
enum AqemStatus aqem_policy_next_phase(const struct AqemPolicy *policy,
                                       double current,
                                       size_t m,
                                       uint32_t outcome,
                                       double *out);

/**
 * Monte Carlo sharpness and Holevo variance at `n` photons. With a null
 * `policy` the Bayesian controller runs on `probe`; otherwise the policy
 * drives the sine state and `probe` is ignored. `workers = 0` uses every
 * core; results do not depend on it.
 *
 * # Safety
 * `policy` must be null or a live handle; `noise` and `out` must be valid.
 */
enum AqemStatus aqem_estimate(enum AqemProbe probe,
                              const struct AqemPolicy *policy,
                              size_t n,
                              const struct AqemNoise *noise,
                              size_t trials,
                              uint64_t seed,
                              size_t workers,
                              struct AqemEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AQEM_H */
