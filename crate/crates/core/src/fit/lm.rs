use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CurveSeries;
use crate::error::{Error, Result};

/// Box constraints, enforced by projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn none(n: usize) -> Self {
        Bounds {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::domain("bound vectors differ in length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::domain("lower bound exceeds upper bound"));
        }
        Ok(Bounds { lower, upper })
    }

    fn project(&self, theta: &mut [f64]) {
        for ((t, l), u) in theta.iter_mut().zip(&self.lower).zip(&self.upper) {
            *t = t.clamp(*l, *u);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative parameter step below which the fit has converged.
    pub step_tol: f64,
    /// Relative change of the residual sum of squares below which it has converged.
    pub cost_tol: f64,
    pub initial_lambda: f64,
    /// Scale the covariance by the reduced χ²; set when no σ was supplied.
    pub scale_covariance: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            step_tol: 1e-8,
            cost_tol: 1e-10,
            initial_lambda: 1e-3,
            scale_covariance: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// 1σ from the inverse normal matrix.
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Euclidean norm of the weighted residual vector.
    pub residual_norm: f64,
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Jacobian rank deficient at the optimum.
    pub singular: bool,
    pub condition_number: f64,
    /// Residuals too large for the stated noise (or for the data scale when
    /// no σ was given).
    pub poor_fit: bool,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.std_errors[i])
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn eval<F: Fn(&[f64]) -> Result<Vec<f64>>>(f: &F, theta: &[f64], m: usize) -> Result<Vec<f64>> {
    let r = f(theta)?;
    if r.len() != m {
        return Err(Error::domain(format!("residual length changed from {m} to {}", r.len())));
    }
    Ok(r)
}

/// Central-difference Jacobian of `f` at `theta`, falling back to a one-sided
/// difference against a bound.
pub fn numerical_jacobian<F: Fn(&[f64]) -> Result<Vec<f64>>>(f: &F, theta: &[f64], bounds: &Bounds) -> Result<DMatrix<f64>> {
    let m = f(theta)?.len();
    let mut jac = DMatrix::zeros(m, theta.len());
    let mut work = theta.to_vec();
    for j in 0..theta.len() {
        let h = 6e-6 * theta[j].abs().max(1e-8);
        let hp = h.min(bounds.upper[j] - theta[j]);
        let hm = h.min(theta[j] - bounds.lower[j]);
        if !(hp + hm > 0.0) {
            continue;
        }
        work[j] = theta[j] + hp;
        let rp = eval(f, &work, m)?;
        work[j] = theta[j] - hm;
        let rm = eval(f, &work, m)?;
        work[j] = theta[j];
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / (hp + hm);
        }
    }
    Ok(jac)
}

/// Levenberg–Marquardt minimization of `‖r(θ)‖²` for a residual function
/// already weighted by 1/σ.
///
/// Damping starts at `initial_lambda`, grows ×10 on a rejected step and
/// shrinks ÷3 on an accepted one, scaled by diag(JᵀJ). Only improving steps
/// are accepted, so the returned cost never exceeds the starting cost.
pub fn least_squares<F: Fn(&[f64]) -> Result<Vec<f64>>>(
    residuals: F,
    theta0: &[f64],
    names: &[&str],
    bounds: &Bounds,
    opts: FitOptions,
) -> Result<FitResult> {
    let p = theta0.len();
    if names.len() != p || bounds.lower.len() != p {
        return Err(Error::domain("parameter, name and bound counts differ"));
    }
    let mut theta = theta0.to_vec();
    bounds.project(&mut theta);
    let mut r = residuals(&theta)?;
    let m = r.len();
    if m < p + 1 {
        return Err(Error::domain(format!(
            "need at least {} residuals for {p} parameters, got {m}",
            p + 1
        )));
    }
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(Error::domain("residuals are not finite at the starting point"));
    }
    let mut lambda = opts.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = numerical_jacobian(&residuals, &theta, bounds)?;
    while iterations < opts.max_iterations {
        if cost == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let max_diag = (0..p).map(|i| a[(i, i)]).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for i in 0..p {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-12 * max_diag);
            }
            let step = damped.lu().solve(&(-&g));
            let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            bounds.project(&mut trial);
            let r_trial = match eval(&residuals, &trial, m) {
                Ok(v) => v,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let c_trial = sum_sq(&r_trial);
            if c_trial.is_finite() && c_trial < cost {
                let rel_step = theta
                    .iter()
                    .zip(&trial)
                    .map(|(a, b)| (a - b).abs() / a.abs().max(1e-12))
                    .fold(0.0f64, f64::max);
                let rel_cost = (cost - c_trial) / cost;
                theta = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_step < opts.step_tol || rel_cost < opts.cost_tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at working precision
            converged = true;
            break;
        }
        jac = numerical_jacobian(&residuals, &theta, bounds)?;
        if converged {
            break;
        }
    }
    summarize(&jac, &r, theta, names, converged, iterations, opts)
}

fn summarize(
    jac: &DMatrix<f64>,
    r: &[f64],
    theta: Vec<f64>,
    names: &[&str],
    converged: bool,
    iterations: usize,
    opts: FitOptions,
) -> Result<FitResult> {
    let (m, p) = jac.shape();
    let chi2 = sum_sq(r);
    let dof = m.saturating_sub(p);
    let reduced = if dof > 0 { chi2 / dof as f64 } else { f64::NAN };
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Singular("SVD failed".into()))?;
    let s = &svd.singular_values;
    let s_max = s.iter().fold(0.0f64, |a, b| a.max(*b));
    let s_min = s.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let condition_number = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    let floor = (s_max * 1e-12).max(f64::MIN_POSITIVE);
    let singular = !(s_min > s_max * 1e-10);
    let scale = if opts.scale_covariance && dof > 0 { reduced } else { 1.0 };
    let mut cov = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..s.len() {
                let sk = s[k].max(floor);
                acc += v_t[(k, i)] * v_t[(k, j)] / (sk * sk);
            }
            cov[i][j] = acc * scale;
        }
    }
    let std_errors = (0..p).map(|i| cov[i][i].max(0.0).sqrt()).collect();
    // without σ there is no noise scale here; fit_curve judges against the data
    let poor_fit = !opts.scale_covariance && reduced > 5.0;
    Ok(FitResult {
        names: names.iter().map(|n| n.to_string()).collect(),
        values: theta,
        std_errors,
        covariance: cov,
        residual_norm: chi2.sqrt(),
        chi2,
        dof,
        reduced_chi2: reduced,
        converged,
        iterations,
        singular,
        condition_number,
        poor_fit,
    })
}

/// Weighted fit of `model(x, θ)` to a curve; σ absent means unit weights and
/// a covariance scaled by the reduced χ².
pub fn fit_curve<M: Fn(f64, &[f64]) -> f64>(
    model: M,
    data: &CurveSeries,
    theta0: &[f64],
    names: &[&str],
    bounds: &Bounds,
    opts: FitOptions,
) -> Result<FitResult> {
    if data.len() < theta0.len() + 1 {
        return Err(Error::domain(format!(
            "need at least {} points for {} parameters, got {}",
            theta0.len() + 1,
            theta0.len(),
            data.len()
        )));
    }
    let opts = FitOptions {
        scale_covariance: data.sigma.is_none(),
        ..opts
    };
    let residuals = |theta: &[f64]| -> Result<Vec<f64>> {
        Ok((0..data.len())
            .map(|i| (data.y[i] - model(data.x[i], theta)) / data.weight_sigma(i))
            .collect())
    };
    let mut fit = least_squares(residuals, theta0, names, bounds, opts)?;
    if data.sigma.is_none() {
        let scale = data.y.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let rms = fit.residual_norm / (data.len() as f64).sqrt();
        fit.poor_fit = rms > 0.05 * scale;
    }
    Ok(fit)
}
