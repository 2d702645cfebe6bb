#ifndef DNLS_H
#define DNLS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum DnlsStatus {
  DNLS_STATUS_OK = 0,
  DNLS_STATUS_NULL_POINTER = 1,
  DNLS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The parameters are valid numbers but outside the model's domain, such as `p <= 5`
   * for the critical frequency or `omega <= gamma^2 / 4`.
   */
  DNLS_STATUS_DOMAIN_ERROR = 3,
  DNLS_STATUS_NUMERICAL_FAILURE = 4,
  DNLS_STATUS_PANIC = 5,
} DnlsStatus;

/**
 * Model parameters `(p, gamma)`.
 */
typedef struct DnlsModel DnlsModel;

/**
 * Split-step solver holding its current state.
 */
typedef struct DnlsSolver DnlsSolver;

/**
 * Landscape scalars at one frequency.
 */
typedef struct DnlsLandscape {
  double omega;
  double mass;
  double d1;
  double d2;
} DnlsLandscape;

/**
 * Spectral summary at one frequency.
 */
typedef struct DnlsSpectrum {
  uintptr_t n_negative;
  double lambda_neg;
  double kernel_residual;
  double chi_phi_cosine;
  double kappa;
} DnlsSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated, truncated
 * to `len - 1` bytes) and returns the full message length without the terminator.
 * Returns 0 when no error has been recorded. `buf` may be null to query the length.
 */
uintptr_t dnls_last_error_message(char *buf, uintptr_t len);

/**
 * Creates a model for `i u_t + u_xx + gamma delta(x) u + |u|^(p-1) u = 0`.
 */
enum DnlsStatus dnls_model_new(double p, double gamma, struct DnlsModel **out);

/**
 * Releases a model. Null is ignored.
 */
void dnls_model_free(struct DnlsModel *model);

/**
 * Degenerate critical frequency `Omega(p, gamma)`; requires `p > 5`.
 */
enum DnlsStatus dnls_critical_frequency(const struct DnlsModel *model, double *omega_out);

/**
 * `d'''(Omega)` from the closed form, cross-checked against the other two routes.
 */
enum DnlsStatus dnls_d_third(const struct DnlsModel *model, double *out);

/**
 * Closed-form mass `m(omega) = ½ ∫ Q_omega²`.
 */
enum DnlsStatus dnls_mass(const struct DnlsModel *model, double omega, double *out);

/**
 * `(omega, m, d', d'')` at `omega`.
 */
enum DnlsStatus dnls_landscape(const struct DnlsModel *model,
                               double omega,
                               struct DnlsLandscape *out);

/**
 * Evaluates `Q_omega` and, when `phi_out` is non-null, `phi_omega = dQ/domega` at the
 * `len` points of `x`.
 */
enum DnlsStatus dnls_profile(const struct DnlsModel *model,
                             double omega,
                             const double *x,
                             uintptr_t len,
                             double *q_out,
                             double *phi_out);

/**
 * Inertia and kernel of the linearised operators plus the constrained coercivity
 * constant at `omega`, on the default grids.
 */
enum DnlsStatus dnls_spectrum(const struct DnlsModel *model,
                              double omega,
                              struct DnlsSpectrum *out);

/**
 * Creates a solver started from `Q + lambda0 phi + rho~ Q` at `omega` on the default
 * evolution grid, with time step `dt` (negative steps run backward).
 */
enum DnlsStatus dnls_solver_new(const struct DnlsModel *model,
                                double omega,
                                double lambda0,
                                double dt,
                                struct DnlsSolver **out);

/**
 * Releases a solver. Null is ignored.
 */
void dnls_solver_free(struct DnlsSolver *solver);

/**
 * Advances the solver by `steps` Strang steps. Fails without changing the time if
 * the state stops being finite.
 */
enum DnlsStatus dnls_solver_step(struct DnlsSolver *solver, uintptr_t steps);

/**
 * Number of grid nodes of the solver state.
 */
enum DnlsStatus dnls_solver_len(const struct DnlsSolver *solver, uintptr_t *len_out);

/**
 * Current time.
 */
enum DnlsStatus dnls_solver_time(const struct DnlsSolver *solver, double *time_out);

/**
 * Copies the nodes and the real and imaginary parts of the state into arrays of
 * exactly `dnls_solver_len` elements. `x_out` may be null.
 */
enum DnlsStatus dnls_solver_state(const struct DnlsSolver *solver,
                                  double *x_out,
                                  double *re_out,
                                  double *im_out,
                                  uintptr_t len);

/**
 * Mass, energy and action (at the solver's frequency) of the current state.
 */
enum DnlsStatus dnls_solver_functionals(const struct DnlsSolver *solver,
                                        double *mass_out,
                                        double *energy_out,
                                        double *action_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DNLS_H */
