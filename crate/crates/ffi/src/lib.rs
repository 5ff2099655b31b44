//! C ABI over `depol-core`.
//!
//! Conventions:
//! * every fallible function returns a [`DepolStatus`] and writes results
//!   through out-pointers;
//! * on failure a message is stored per thread and can be read with
//!   [`depol_last_error_message`];
//! * objects are opaque handles created by `*_new`-style functions and
//!   released with the matching `*_free`;
//! * panics never cross the boundary; they are reported as
//!   `DEPOL_STATUS_PANIC`;
//! * null pointers are rejected with `DEPOL_STATUS_NULL_POINTER`; any other
//!   pointer must be valid for the documented length.

#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use depol_core::bath::{self, BathParams, EnsembleOptions, EtaModel, EtaSamples, SpinLockMode};
use depol_core::charge::{self, DiffusionParams, ProfileParams};
use depol_core::error::{Error, ErrorCategory};
use depol_core::fit::{self, Amplitude, CurveSeries, FitResult};
use depol_core::kinetics::{self, Populations3};
use depol_core::oracle;
use depol_core::units::{ppm_to_density, AngularFrequency, Length, NvAxis, Rate, Time};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepolStatus {
    Ok = 0,
    Domain = 1,
    Singular = 2,
    Numerical = 3,
    NonConvergence = 4,
    Config = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepolSpinLockMode {
    Ideal = 0,
    Full = 1,
}

/// Opaque bath parameter set.
pub struct DepolBathParams(BathParams);

/// Opaque sampled curve (x, y, optional σ).
pub struct DepolCurve(CurveSeries);

/// Opaque fit result.
pub struct DepolFitResult(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> DepolStatus {
    match e.category() {
        ErrorCategory::Domain => DepolStatus::Domain,
        ErrorCategory::Singular => DepolStatus::Singular,
        ErrorCategory::Numerical => DepolStatus::Numerical,
        ErrorCategory::NonConvergence => DepolStatus::NonConvergence,
        ErrorCategory::Config => DepolStatus::Config,
        ErrorCategory::Io => DepolStatus::Io,
    }
}

enum Fail {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DepolStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DepolStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer passed as '{name}'"));
            DepolStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            DepolStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(name))
}

unsafe fn in_ref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn slice<'a>(p: *const f64, n: usize, name: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn string(p: *const c_char, name: &'static str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::domain(format!("'{name}' is not valid UTF-8")))?
        .to_string())
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn depol_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn depol_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- bath parameters ----

/// Parameters fitted to the dense-ensemble data (16 ppm, 3.3 MHz, 9 MHz).
#[no_mangle]
pub extern "C" fn depol_bath_params_reference_fit(out_params: *mut *mut DepolBathParams) -> DepolStatus {
    guard(|| {
        *unsafe { out(out_params, "out_params")? } = Box::into_raw(Box::new(DepolBathParams(BathParams::reference_fit())));
        Ok(())
    })
}

/// Builds a parameter set. Frequencies are cyclic (MHz), `probe_group` is
/// 0–3 for groups A–D; group weights are uniform.
#[no_mangle]
pub extern "C" fn depol_bath_params_new(
    n_f_ppm: f64,
    gamma_f_mhz: f64,
    w_mhz: f64,
    r_inner_nm: f64,
    r_outer_nm: f64,
    probe_group: u32,
    out_params: *mut *mut DepolBathParams,
) -> DepolStatus {
    guard(|| {
        let o = unsafe { out(out_params, "out_params")? };
        let group = NvAxis::from_index(probe_group as usize)
            .ok_or_else(|| Error::domain(format!("probe group must be 0..=3, got {probe_group}")))?;
        let p = BathParams {
            n_f: ppm_to_density(n_f_ppm)?,
            gamma_f: AngularFrequency::from_mhz(gamma_f_mhz),
            w: AngularFrequency::from_mhz(w_mhz),
            r_inner: Length(r_inner_nm),
            r_outer: Length(r_outer_nm),
            probe_group: group,
            ..BathParams::reference_fit()
        };
        p.validate()?;
        *o = Box::into_raw(Box::new(DepolBathParams(p)));
        Ok(())
    })
}

/// # Safety
/// `params` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn depol_bath_params_free(params: *mut DepolBathParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

// ---- curves ----

/// Copies `n` points into a new curve. `sigma` may be NULL.
///
/// # Safety
/// `x`, `y` (and `sigma` when non-NULL) must point to `n` doubles; units are
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn depol_curve_new(
    x: *const f64,
    y: *const f64,
    sigma: *const f64,
    n: usize,
    x_unit: *const c_char,
    y_unit: *const c_char,
    out_curve: *mut *mut DepolCurve,
) -> DepolStatus {
    guard(|| {
        let o = out(out_curve, "out_curve")?;
        let xs = slice(x, n, "x")?.to_vec();
        let ys = slice(y, n, "y")?.to_vec();
        let s = if sigma.is_null() {
            None
        } else {
            Some(slice(sigma, n, "sigma")?.to_vec())
        };
        let c = CurveSeries::new(xs, ys, s, &string(x_unit, "x_unit")?, &string(y_unit, "y_unit")?)?;
        *o = Box::into_raw(Box::new(DepolCurve(c)));
        Ok(())
    })
}

/// Number of points, 0 for NULL.
///
/// # Safety
/// `curve` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn depol_curve_len(curve: *const DepolCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.len())
}

/// Whether the curve carries σ values (0 or 1).
///
/// # Safety
/// `curve` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn depol_curve_has_sigma(curve: *const DepolCurve) -> i32 {
    curve.as_ref().map_or(0, |c| c.0.sigma.is_some() as i32)
}

/// Copies x, y and σ into caller buffers of length `capacity` (≥ the curve
/// length). Any buffer may be NULL to skip it; σ is skipped when absent.
///
/// # Safety
/// Non-NULL buffers must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn depol_curve_copy(
    curve: *const DepolCurve,
    x: *mut f64,
    y: *mut f64,
    sigma: *mut f64,
    capacity: usize,
) -> DepolStatus {
    guard(|| {
        let c = &in_ref(curve, "curve")?.0;
        if capacity < c.len() {
            return Err(Error::domain(format!("buffer holds {capacity} values, curve has {}", c.len())).into());
        }
        let put = |dst: *mut f64, src: &[f64]| {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
            }
        };
        put(x, &c.x);
        put(y, &c.y);
        if let Some(s) = &c.sigma {
            put(sigma, s);
        }
        Ok(())
    })
}

/// # Safety
/// `curve` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn depol_curve_free(curve: *mut DepolCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

// ---- decay statistics ----

/// ∫ρ(γ;T)e^{−γt}dγ for scale `t_scale_us` at time `t_us`.
#[no_mangle]
pub extern "C" fn depol_laplace_check(t_scale_us: f64, t_us: f64, out_value: *mut f64) -> DepolStatus {
    guard(|| {
        *unsafe { out(out_value, "out_value")? } = bath::laplace_check(Time(t_scale_us), Time(t_us))?;
        Ok(())
    })
}

/// Rate density ρ(γ;T), γ in 1/µs.
#[no_mangle]
pub extern "C" fn depol_rho_gamma(gamma_per_us: f64, t_scale_us: f64, out_value: *mut f64) -> DepolStatus {
    guard(|| {
        *unsafe { out(out_value, "out_value")? } = bath::rho_gamma(gamma_per_us, Time(t_scale_us))?;
        Ok(())
    })
}

/// Analytic T (µs) at group splitting `delta_mhz` from `samples` orientation
/// draws.
///
/// # Safety
/// `params` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn depol_analytic_t(
    params: *const DepolBathParams,
    delta_mhz: f64,
    samples: usize,
    seed: u64,
    out_t_us: *mut f64,
) -> DepolStatus {
    guard(|| {
        let p = &in_ref(params, "params")?.0;
        let o = out(out_t_us, "out_t_us")?;
        let est = EtaSamples::draw(p, samples, seed)?.evaluate(EtaModel::Bare, AngularFrequency::from_mhz(delta_mhz), p);
        *o = bath::analytic_t(p, est.eta)?.0;
        Ok(())
    })
}

/// Monte Carlo P(t) over `n_configs` bath configurations.
///
/// # Safety
/// `times_us` must hold `n_times` doubles; `params` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn depol_ensemble_polarization(
    params: *const DepolBathParams,
    delta_mhz: f64,
    times_us: *const f64,
    n_times: usize,
    n_configs: usize,
    seed: u64,
    out_curve: *mut *mut DepolCurve,
) -> DepolStatus {
    guard(|| {
        let p = &in_ref(params, "params")?.0;
        let o = out(out_curve, "out_curve")?;
        let t = slice(times_us, n_times, "times_us")?;
        let opts = EnsembleOptions {
            n_configs,
            ..Default::default()
        };
        let c = bath::ensemble_polarization(p, AngularFrequency::from_mhz(delta_mhz), t, opts, seed)?;
        *o = Box::into_raw(Box::new(DepolCurve(c)));
        Ok(())
    })
}

/// 1/T₁ (1/ms) against δ (MHz).
///
/// # Safety
/// `deltas_mhz` must hold `n` doubles; `params` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn depol_resonance_curve(
    params: *const DepolBathParams,
    deltas_mhz: *const f64,
    n: usize,
    samples: usize,
    seed: u64,
    out_curve: *mut *mut DepolCurve,
) -> DepolStatus {
    guard(|| {
        let p = &in_ref(params, "params")?.0;
        let o = out(out_curve, "out_curve")?;
        let grid: Vec<AngularFrequency> = slice(deltas_mhz, n, "deltas_mhz")?
            .iter()
            .map(|d| AngularFrequency::from_mhz(*d))
            .collect();
        *o = Box::into_raw(Box::new(DepolCurve(bath::resonance_curve(&grid, p, samples, seed)?)));
        Ok(())
    })
}

/// Spin-lock lifetime (µs) at Rabi frequency `omega_mhz`.
///
/// # Safety
/// `params` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn depol_spinlock_lifetime(
    params: *const DepolBathParams,
    omega_mhz: f64,
    delta_mhz: f64,
    mode: DepolSpinLockMode,
    samples: usize,
    seed: u64,
    out_t_us: *mut f64,
) -> DepolStatus {
    guard(|| {
        let p = &in_ref(params, "params")?.0;
        let o = out(out_t_us, "out_t_us")?;
        let m = match mode {
            DepolSpinLockMode::Ideal => SpinLockMode::Ideal,
            DepolSpinLockMode::Full => SpinLockMode::Full,
        };
        *o = bath::spinlock_lifetime(
            AngularFrequency::from_mhz(omega_mhz),
            AngularFrequency::from_mhz(delta_mhz),
            p,
            m,
            samples,
            seed,
        )?
        .0;
        Ok(())
    })
}

// ---- single pairs and kinetics ----

/// Golden-rule rate (1/µs) for one spin–fluctuator pair.
#[no_mangle]
pub extern "C" fn depol_golden_rule_rate(
    r_nm: f64,
    g: f64,
    h: f64,
    detuning_mhz: f64,
    gamma_f_mhz: f64,
    out_rate: *mut f64,
) -> DepolStatus {
    guard(|| {
        let o = unsafe { out(out_rate, "out_rate")? };
        *o = oracle::golden_rule_rate(
            Length(r_nm),
            g,
            h,
            AngularFrequency::from_mhz(detuning_mhz),
            AngularFrequency::from_mhz(gamma_f_mhz),
        )?
        .0;
        Ok(())
    })
}

/// Populations of (−1, 0, +1) after `t_us`, rates in kHz.
///
/// # Safety
/// `p0` and `p_out` must each hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn depol_evolve_populations(
    p0: *const f64,
    gamma1_khz: f64,
    gamma2_khz: f64,
    t_us: f64,
    p_out: *mut f64,
) -> DepolStatus {
    guard(|| {
        let p = slice(p0, 3, "p0")?;
        if p_out.is_null() {
            return Err(Fail::Null("p_out"));
        }
        let start = Populations3::new([p[0], p[1], p[2]])?;
        let r = kinetics::evolve_populations(&start, Rate::from_khz(gamma1_khz), Rate::from_khz(gamma2_khz), Time(t_us))?;
        ptr::copy_nonoverlapping(r.0.as_ptr(), p_out, 3);
        Ok(())
    })
}

// ---- charge diffusion ----

/// Normalized centre recovery of the default dip-plus-ring profile.
///
/// # Safety
/// `times_us` must hold `n_times` doubles.
#[no_mangle]
pub unsafe extern "C" fn depol_center_recovery(
    a_nm: f64,
    t_hop_ns: f64,
    times_us: *const f64,
    n_times: usize,
    out_curve: *mut *mut DepolCurve,
) -> DepolStatus {
    guard(|| {
        let o = out(out_curve, "out_curve")?;
        let t = slice(times_us, n_times, "times_us")?;
        let d = DiffusionParams::new(Length(a_nm), Time::from_ns(t_hop_ns))?;
        let g = charge::init_profile(&ProfileParams::default())?;
        *o = Box::into_raw(Box::new(DepolCurve(charge::center_recovery(&g, d.d(), t)?)));
        Ok(())
    })
}

// ---- fitting ----

/// Fits A·e^{−√(t/T₁)}; with `fix_amplitude` non-zero A is held at
/// `amplitude`.
///
/// # Safety
/// `curve` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn depol_fit_stretched(
    curve: *const DepolCurve,
    fix_amplitude: i32,
    amplitude: f64,
    out_fit: *mut *mut DepolFitResult,
) -> DepolStatus {
    guard(|| {
        let c = &in_ref(curve, "curve")?.0;
        let o = out(out_fit, "out_fit")?;
        let amp = if fix_amplitude != 0 {
            Amplitude::Fixed(amplitude)
        } else {
            Amplitude::Free
        };
        *o = Box::into_raw(Box::new(DepolFitResult(fit::fit_stretched(c, amp)?)));
        Ok(())
    })
}

/// Value and 1σ of the named parameter (e.g. "T1", "A"). `out_std_error`
/// may be NULL.
///
/// # Safety
/// `fit` must be a live handle and `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn depol_fit_result_parameter(
    fit: *const DepolFitResult,
    name: *const c_char,
    out_value: *mut f64,
    out_std_error: *mut f64,
) -> DepolStatus {
    guard(|| {
        let f = &in_ref(fit, "fit")?.0;
        let n = string(name, "name")?;
        let o = out(out_value, "out_value")?;
        let i = f
            .names
            .iter()
            .position(|k| *k == n)
            .ok_or_else(|| Error::domain(format!("no parameter named '{n}'")))?;
        *o = f.values[i];
        if let Some(s) = out_std_error.as_mut() {
            *s = f.std_errors[i];
        }
        Ok(())
    })
}

/// Whether the fit converged (0 or 1); 0 for NULL.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn depol_fit_result_converged(fit: *const DepolFitResult) -> i32 {
    fit.as_ref().map_or(0, |f| f.0.converged as i32)
}

/// Reduced χ², NaN for NULL.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn depol_fit_result_reduced_chi2(fit: *const DepolFitResult) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.reduced_chi2)
}

/// # Safety
/// `fit` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn depol_fit_result_free(fit: *mut DepolFitResult) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
