#ifndef KKF_H
#define KKF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KkfStatus {
  KKF_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  KKF_STATUS_NULL_POINTER = 1,
  /**
   * An argument was out of range (e.g. a buffer of the wrong length).
   */
  KKF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The config or parameters were rejected.
   */
  KKF_STATUS_VALIDATION = 3,
  /**
   * The solver failed while running.
   */
  KKF_STATUS_RUNTIME = 4,
  /**
   * A string argument was not valid UTF-8.
   */
  KKF_STATUS_UTF8 = 5,
  /**
   * A Rust panic was caught.
   */
  KKF_STATUS_PANIC = 6,
} KkfStatus;

/**
 * Opaque solver state.
 */
typedef struct KkfSimulation KkfSimulation;

typedef struct KkfOrderParameters {
  double r_re;
  double r_im;
  double s_re;
  double s_im;
} KkfOrderParameters;

typedef struct KkfDims {
  size_t n_omega;
  size_t n_theta;
  size_t n_slices;
  /**
   * Steps needed to reach the configured final time.
   */
  size_t n_t;
  double d_omega;
  double d_t;
} KkfDims;

typedef struct KkfStabilityReport {
  double d_omega_max;
  bool d_omega_ok;
  /**
   * False when the time step is unconstrained; `d_t_max` is then +inf.
   */
  bool d_t_constrained;
  double d_t_max;
  bool d_t_ok;
  double g_omega_max;
  bool g_omega_ok;
  bool overall_ok;
} KkfStabilityReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next `kkf_*` call on the same thread.
 */
const char *kkf_last_error_message(void);

/**
 * Builds a simulation from a JSON run config. Unknown keys are rejected
 * unless `lenient` is set.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KkfStatus kkf_simulation_new_from_json(const char *json,
                                            bool lenient,
                                            struct KkfSimulation **out);

/**
 * Releases a simulation. NULL is ignored.
 *
 * # Safety
 * `sim` must come from [`kkf_simulation_new_from_json`] and not be used again.
 */
void kkf_simulation_free(struct KkfSimulation *sim);

/**
 * Advances `n_steps` time steps. On failure the state is left at the last
 * good step.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum KkfStatus kkf_simulation_step(struct KkfSimulation *sim, size_t n_steps);

/**
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum KkfStatus kkf_simulation_time(const struct KkfSimulation *sim, double *out);

/**
 * Population order parameters `r` and `s` of the current state.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum KkfStatus kkf_simulation_order_parameters(const struct KkfSimulation *sim,
                                               struct KkfOrderParameters *out);

/**
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum KkfStatus kkf_simulation_dims(const struct KkfSimulation *sim, struct KkfDims *out);

/**
 * Copies the density into `buf`, ordered `[i][j][k]` with `k` fastest.
 * `len` must equal `n_omega * n_theta * n_slices`.
 *
 * # Safety
 * `sim` must be a live handle and `buf` must hold `len` doubles.
 */
enum KkfStatus kkf_simulation_copy_field(const struct KkfSimulation *sim, double *buf, size_t len);

/**
 * Evaluates the positivity conditions for the given parameters and lattice.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KkfStatus kkf_validate_stability(double m,
                                      double noise,
                                      double coupling,
                                      double omega1,
                                      double d_omega,
                                      double d_t,
                                      double g_omega,
                                      struct KkfStabilityReport *out);

/**
 * Fundamental solution of the regularized operator with pole at the origin.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KkfStatus kkf_gamma_eps(double omega, double theta, double t, double epsilon, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KKF_H */
