#ifndef LEVY_SPDE_H
#define LEVY_SPDE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. `Ok` is zero; everything else leaves a
 * diagnostic readable through `levy_spde_last_error`.
 */
typedef enum LevyStatus {
  LevyStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  LevyStatus_NullPointer = 1,
  /**
   * A parameter is outside its mathematical domain.
   */
  LevyStatus_Param = 2,
  /**
   * The request would exceed addressable resources.
   */
  LevyStatus_Resource = 3,
  /**
   * A value required to be finite was not.
   */
  LevyStatus_Numerical = 4,
  /**
   * The operation is not defined for this configuration.
   */
  LevyStatus_Unsupported = 5,
  /**
   * Quadrature could not reach the requested tolerance.
   */
  LevyStatus_Accuracy = 6,
  /**
   * The existence verdict for the configuration is negative.
   */
  LevyStatus_Refused = 7,
  /**
   * Any other library failure.
   */
  LevyStatus_Internal = 8,
} LevyStatus;

/**
 * Fundamental solution of one catalog equation.
 */
typedef struct GreenHandle GreenHandle;

/**
 * White-noise realization: grid, stability index, seed, increments.
 */
typedef struct NoiseHandle NoiseHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string; never null.
 */
const char *levy_spde_version(void);

/**
 * Message for the most recent failure on the calling thread, as a
 * NUL-terminated string. The pointer stays valid until the next failing
 * call on the same thread; never null, empty before any failure.
 */
const char *levy_spde_last_error(void);

/**
 * Creates the fundamental solution for an operator code (0 heat, 1 wave,
 * 2 poisson) and spatial dimension.
 *
 * # Safety
 * `out` must point to writable storage for one pointer. On `Ok` it
 * receives a handle that must be released with `levy_spde_green_free`.
 */
enum LevyStatus levy_spde_green_new(uint32_t operator_, uint32_t dim, struct GreenHandle **out);

/**
 * Releases a handle from `levy_spde_green_new`; null is a no-op.
 *
 * # Safety
 * `g` must be a pointer returned by `levy_spde_green_new` that has not
 * been freed already.
 */
void levy_spde_green_free(struct GreenHandle *g);

/**
 * Draws one stable white-noise realization on the grid with axis `i`
 * spanning `[origin[i], origin[i] + extent[i])` split into `cells[i]`
 * cells.
 *
 * # Safety
 * `origin`, `extent`, and `cells` must each point to `ndim` readable
 * elements, and `out` to writable storage for one pointer. On `Ok` it
 * receives a handle that must be released with `levy_spde_noise_free`.
 */
enum LevyStatus levy_spde_noise_sample(double alpha,
                                       const double *origin,
                                       const double *extent,
                                       const uint64_t *cells,
                                       uintptr_t ndim,
                                       uint64_t seed,
                                       struct NoiseHandle **out);

/**
 * Releases a handle from `levy_spde_noise_sample`; null is a no-op.
 *
 * # Safety
 * `noise` must be a pointer returned by `levy_spde_noise_sample` that
 * has not been freed already.
 */
void levy_spde_noise_free(struct NoiseHandle *noise);

/**
 * Number of cell increments held by the realization.
 *
 * # Safety
 * `noise` must be a live handle and `out` writable for one usize.
 */
enum LevyStatus levy_spde_noise_len(const struct NoiseHandle *noise, uintptr_t *out);

/**
 * Copies the increments, in row-major cell order, into `buf`.
 *
 * # Safety
 * `noise` must be a live handle and `buf` writable for `len` doubles;
 * `len` must equal the value from `levy_spde_noise_len`.
 */
enum LevyStatus levy_spde_noise_copy_increments(const struct NoiseHandle *noise,
                                                double *buf,
                                                uintptr_t len);

/**
 * Which solution notions exist for (operator, dim, alpha).
 *
 * # Safety
 * `mild`, `generalized`, and `random_field` must each be writable for
 * one bool.
 */
enum LevyStatus levy_spde_existence_verdict(uint32_t operator_,
                                            uint32_t dim,
                                            double alpha,
                                            bool *mild,
                                            bool *generalized,
                                            bool *random_field);

/**
 * Mild-solution value at one space-time point (time first, then space;
 * for the static kernel the point is spatial only). Refuses when the
 * existence verdict for the configuration is negative.
 *
 * # Safety
 * `g` and `noise` must be live handles, `point` readable for `len`
 * doubles, and `out` writable for one double.
 */
enum LevyStatus levy_spde_mild_value(const struct GreenHandle *g,
                                     const struct NoiseHandle *noise,
                                     const double *point,
                                     uintptr_t len,
                                     double *out);

/**
 * Pairing of the generalized solution with the bump test function of
 * the given center, per-axis radii, and amplitude. `rel_tol <= 0` uses
 * the library default for the kernel convolution quadrature.
 *
 * # Safety
 * `g` and `noise` must be live handles, `center` and `radii` readable
 * for `phi_len` doubles each, and `out` writable for one double.
 */
enum LevyStatus levy_spde_generalized_pairing(const struct GreenHandle *g,
                                              const struct NoiseHandle *noise,
                                              const double *center,
                                              const double *radii,
                                              uintptr_t phi_len,
                                              double amplitude,
                                              double rel_tol,
                                              double *out);

/**
 * Closed-form L^alpha norm of the heat kernel up to time `t`; sets
 * `diverged` and an infinite value above the integrability threshold.
 *
 * # Safety
 * `out_value` and `out_diverged` must each be writable.
 */
enum LevyStatus levy_spde_heat_norm_closed(double t,
                                           double alpha,
                                           uint32_t dim,
                                           double *out_value,
                                           bool *out_diverged);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LEVY_SPDE_H */
