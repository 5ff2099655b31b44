#ifndef DEPOL_H
#define DEPOL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DepolStatus {
  DEPOL_STATUS_OK = 0,
  DEPOL_STATUS_DOMAIN = 1,
  DEPOL_STATUS_SINGULAR = 2,
  DEPOL_STATUS_NUMERICAL = 3,
  DEPOL_STATUS_NON_CONVERGENCE = 4,
  DEPOL_STATUS_CONFIG = 5,
  DEPOL_STATUS_IO = 6,
  DEPOL_STATUS_NULL_POINTER = 7,
  DEPOL_STATUS_PANIC = 8,
} DepolStatus;

typedef enum DepolSpinLockMode {
  DEPOL_SPIN_LOCK_MODE_IDEAL = 0,
  DEPOL_SPIN_LOCK_MODE_FULL = 1,
} DepolSpinLockMode;

/*
 Opaque bath parameter set.
 */
typedef struct DepolBathParams DepolBathParams;

/*
 Opaque sampled curve (x, y, optional σ).
 */
typedef struct DepolCurve DepolCurve;

/*
 Opaque fit result.
 */
typedef struct DepolFitResult DepolFitResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL. The pointer is
 valid until the next library call on the same thread.
 */
const char *depol_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *depol_version(void);

/*
 Parameters fitted to the dense-ensemble data (16 ppm, 3.3 MHz, 9 MHz).
 */
enum DepolStatus depol_bath_params_reference_fit(struct DepolBathParams **out_params);

/*
 Builds a parameter set. Frequencies are cyclic (MHz), `probe_group` is
 0–3 for groups A–D; group weights are uniform.
 */
enum DepolStatus depol_bath_params_new(double n_f_ppm,
                                       double gamma_f_mhz,
                                       double w_mhz,
                                       double r_inner_nm,
                                       double r_outer_nm,
                                       uint32_t probe_group,
                                       struct DepolBathParams **out_params);

/*
 # Safety
 `params` must come from this library and not be used afterwards.
 */
void depol_bath_params_free(struct DepolBathParams *params);

/*
 Copies `n` points into a new curve. `sigma` may be NULL.

 # Safety
 `x`, `y` (and `sigma` when non-NULL) must point to `n` doubles; units are
 NUL-terminated strings.
 */
enum DepolStatus depol_curve_new(const double *x,
                                 const double *y,
                                 const double *sigma,
                                 size_t n,
                                 const char *x_unit,
                                 const char *y_unit,
                                 struct DepolCurve **out_curve);

/*
 Number of points, 0 for NULL.

 # Safety
 `curve` must be NULL or a live handle.
 */
size_t depol_curve_len(const struct DepolCurve *curve);

/*
 Whether the curve carries σ values (0 or 1).

 # Safety
 `curve` must be NULL or a live handle.
 */
int32_t depol_curve_has_sigma(const struct DepolCurve *curve);

/*
 Copies x, y and σ into caller buffers of length `capacity` (≥ the curve
 length). Any buffer may be NULL to skip it; σ is skipped when absent.

 # Safety
 Non-NULL buffers must hold `capacity` doubles.
 */
enum DepolStatus depol_curve_copy(const struct DepolCurve *curve,
                                  double *x,
                                  double *y,
                                  double *sigma,
                                  size_t capacity);

/*
 # Safety
 `curve` must come from this library and not be used afterwards.
 */
void depol_curve_free(struct DepolCurve *curve);

/*
 ∫ρ(γ;T)e^{−γt}dγ for scale `t_scale_us` at time `t_us`.
 */
enum DepolStatus depol_laplace_check(double t_scale_us, double t_us, double *out_value);

/*
 Rate density ρ(γ;T), γ in 1/µs.
 */
enum DepolStatus depol_rho_gamma(double gamma_per_us, double t_scale_us, double *out_value);

/*
 Analytic T (µs) at group splitting `delta_mhz` from `samples` orientation
 draws.

 # Safety
 `params` must be a live handle.
 */
enum DepolStatus depol_analytic_t(const struct DepolBathParams *params,
                                  double delta_mhz,
                                  size_t samples,
                                  uint64_t seed,
                                  double *out_t_us);

/*
 Monte Carlo P(t) over `n_configs` bath configurations.

 # Safety
 `times_us` must hold `n_times` doubles; `params` must be a live handle.
 */
enum DepolStatus depol_ensemble_polarization(const struct DepolBathParams *params,
                                             double delta_mhz,
                                             const double *times_us,
                                             size_t n_times,
                                             size_t n_configs,
                                             uint64_t seed,
                                             struct DepolCurve **out_curve);

/*
 1/T₁ (1/ms) against δ (MHz).

 # Safety
 `deltas_mhz` must hold `n` doubles; `params` must be a live handle.
 */
enum DepolStatus depol_resonance_curve(const struct DepolBathParams *params,
                                       const double *deltas_mhz,
                                       size_t n,
                                       size_t samples,
                                       uint64_t seed,
                                       struct DepolCurve **out_curve);

/*
 Spin-lock lifetime (µs) at Rabi frequency `omega_mhz`.

 # Safety
 `params` must be a live handle.
 */
enum DepolStatus depol_spinlock_lifetime(const struct DepolBathParams *params,
                                         double omega_mhz,
                                         double delta_mhz,
                                         enum DepolSpinLockMode mode,
                                         size_t samples,
                                         uint64_t seed,
                                         double *out_t_us);

/*
 Golden-rule rate (1/µs) for one spin–fluctuator pair.
 */
enum DepolStatus depol_golden_rule_rate(double r_nm,
                                        double g,
                                        double h,
                                        double detuning_mhz,
                                        double gamma_f_mhz,
                                        double *out_rate);

/*
 Populations of (−1, 0, +1) after `t_us`, rates in kHz.

 # Safety
 `p0` and `p_out` must each hold 3 doubles.
 */
enum DepolStatus depol_evolve_populations(const double *p0,
                                          double gamma1_khz,
                                          double gamma2_khz,
                                          double t_us,
                                          double *p_out);

/*
 Normalized centre recovery of the default dip-plus-ring profile.

 # Safety
 `times_us` must hold `n_times` doubles.
 */
enum DepolStatus depol_center_recovery(double a_nm,
                                       double t_hop_ns,
                                       const double *times_us,
                                       size_t n_times,
                                       struct DepolCurve **out_curve);

/*
 Fits A·e^{−√(t/T₁)}; with `fix_amplitude` non-zero A is held at
 `amplitude`.

 # Safety
 `curve` must be a live handle.
 */
enum DepolStatus depol_fit_stretched(const struct DepolCurve *curve,
                                     int32_t fix_amplitude,
                                     double amplitude,
                                     struct DepolFitResult **out_fit);

/*
 Value and 1σ of the named parameter (e.g. "T1", "A"). `out_std_error`
 may be NULL.

 # Safety
 `fit` must be a live handle and `name` a NUL-terminated string.
 */
enum DepolStatus depol_fit_result_parameter(const struct DepolFitResult *fit,
                                            const char *name,
                                            double *out_value,
                                            double *out_std_error);

/*
 Whether the fit converged (0 or 1); 0 for NULL.

 # Safety
 `fit` must be NULL or a live handle.
 */
int32_t depol_fit_result_converged(const struct DepolFitResult *fit);

/*
 Reduced χ², NaN for NULL.

 # Safety
 `fit` must be NULL or a live handle.
 */
double depol_fit_result_reduced_chi2(const struct DepolFitResult *fit);

/*
 # Safety
 `fit` must come from this library and not be used afterwards.
 */
void depol_fit_result_free(struct DepolFitResult *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEPOL_H */
