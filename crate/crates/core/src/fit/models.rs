use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{fit_curve, least_squares, Bounds, CurveSeries, FitOptions, FitResult};
use crate::bath::{BathParams, EtaModel, EtaSamples};
use crate::error::{Error, Result};
use crate::kinetics::population_diffs_stretched;
use crate::numerics::logspace;
use crate::units::{ppm_to_density, AngularFrequency, Rate, Time, J0};

/// Prefactor convention of the stretched exponential.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Amplitude {
    #[default]
    Free,
    Fixed(f64),
}

/// Fits `A·e^{−√(t/T₁)}`. Parameters are `A` (when free) and `T1` in the
/// time unit of the data.
pub fn fit_stretched(data: &CurveSeries, amplitude: Amplitude) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::domain("empty decay curve"));
    }
    let a0 = match amplitude {
        Amplitude::Fixed(a) => a,
        Amplitude::Free => data.y[0].max(f64::MIN_POSITIVE),
    };
    let t0 = stretched_guess(data, a0);
    let t_lo = 1e-9 * data.x.last().copied().unwrap_or(1.0).abs().max(f64::MIN_POSITIVE);
    let opts = FitOptions::default();
    match amplitude {
        Amplitude::Fixed(a) => fit_curve(
            move |t, th| a * (-(t / th[0]).max(0.0).sqrt()).exp(),
            data,
            &[t0],
            &["T1"],
            &Bounds::new(vec![t_lo], vec![f64::INFINITY])?,
            opts,
        ),
        Amplitude::Free => fit_curve(
            |t, th| th[0] * (-(t / th[1]).max(0.0).sqrt()).exp(),
            data,
            &[a0, t0],
            &["A", "T1"],
            &Bounds::new(vec![0.0, t_lo], vec![f64::INFINITY, f64::INFINITY])?,
            opts,
        ),
    }
}

// time where the curve crosses A/e, interpolated; T₁ equals that time
fn stretched_guess(data: &CurveSeries, a: f64) -> f64 {
    let target = a / std::f64::consts::E;
    for i in 1..data.len() {
        let (y0, y1) = (data.y[i - 1], data.y[i]);
        if y0 >= target && y1 < target {
            let f = (y0 - target) / (y0 - y1);
            return data.x[i - 1] + f * (data.x[i] - data.x[i - 1]);
        }
    }
    let (t, y) = (*data.x.last().unwrap(), *data.y.last().unwrap());
    if y > 0.0 && y < a && t > 0.0 {
        t / (a / y).ln().powi(2)
    } else {
        10.0 * t.abs().max(1.0)
    }
}

/// `offset + A/(1 + (2(x−x₀)/FWHM)²)`.
pub fn lorentzian(x: f64, amplitude: f64, center: f64, fwhm: f64, offset: f64) -> f64 {
    let u = 2.0 * (x - center) / fwhm;
    offset + amplitude / (1.0 + u * u)
}

/// Parameters `amplitude`, `center`, `fwhm`, `offset`.
pub fn fit_lorentzian(data: &CurveSeries) -> Result<FitResult> {
    if data.len() < 5 {
        return Err(Error::domain(format!("Lorentzian fit needs >= 5 points, got {}", data.len())));
    }
    let n = data.len();
    let edge = 0.5 * (data.y[0] + data.y[n - 1]);
    let (imax, _) = data
        .y
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if *v > b.1 { (i, *v) } else { b });
    let (imin, _) = data
        .y
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, v)| if *v < b.1 { (i, *v) } else { b });
    let ipk = if (data.y[imax] - edge).abs() >= (data.y[imin] - edge).abs() {
        imax
    } else {
        imin
    };
    let offset = if ipk == imax {
        data.y[0].min(data.y[n - 1])
    } else {
        data.y[0].max(data.y[n - 1])
    };
    let amp = data.y[ipk] - offset;
    let half = offset + 0.5 * amp;
    let crosses = |i: usize| (data.y[i] - half).signum() != (data.y[ipk] - half).signum();
    let left = (0..ipk).rev().find(|&i| crosses(i)).map_or(data.x[0], |i| data.x[i]);
    let right = (ipk + 1..n).find(|&i| crosses(i)).map_or(data.x[n - 1], |i| data.x[i]);
    let span = data.x[n - 1] - data.x[0];
    let fwhm0 = (right - left).max(span / (n as f64));
    let theta0 = [amp, data.x[ipk], fwhm0, offset];
    let lo = vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 1e-9 * span, f64::NEG_INFINITY];
    fit_curve(
        |x, t| lorentzian(x, t[0], t[1], t[2], t[3]),
        data,
        &theta0,
        &["amplitude", "center", "fwhm", "offset"],
        &Bounds::new(lo, vec![f64::INFINITY; 4])?,
        FitOptions::default(),
    )
}

fn time_scale_to_us(unit: &str) -> Result<f64> {
    match unit {
        "us" | "µs" => Ok(1.0),
        "ms" => Ok(1e3),
        "ns" => Ok(1e-3),
        "s" => Ok(1e6),
        other => Err(Error::domain(format!("expected a time axis, got unit '{other}'"))),
    }
}

/// Joint fit of the stretched population differences. Parameters are
/// `gamma1_khz` and `gamma2_khz`.
pub fn fit_rate_pair(d1: &CurveSeries, d2: &CurveSeries) -> Result<FitResult> {
    if d1.x != d2.x {
        return Err(Error::domain("population-difference series must share a time grid"));
    }
    if d1.x_unit != d2.x_unit {
        return Err(Error::domain(format!("time units differ ('{}' vs '{}')", d1.x_unit, d2.x_unit)));
    }
    if d1.sigma.is_some() != d2.sigma.is_some() {
        return Err(Error::domain("either both or neither series may carry sigma"));
    }
    let to_us = time_scale_to_us(&d1.x_unit)?;
    let n = d1.len();
    let residuals = |th: &[f64]| -> Result<Vec<f64>> {
        let (g1, g2) = (Rate::from_khz(th[0]), Rate::from_khz(th[1]));
        let mut r = Vec::with_capacity(2 * n);
        for (s, k) in [(d1, 0usize), (d2, 1)] {
            for i in 0..n {
                let (a, b) = population_diffs_stretched(g1, g2, Time(s.x[i] * to_us))?;
                let model = if k == 0 { a } else { b };
                r.push((s.y[i] - model) / s.weight_sigma(i));
            }
        }
        Ok(r)
    };
    // coarse pre-scan for a starting point
    let mut best = (f64::INFINITY, [1.0, 0.0]);
    for g1 in logspace(1e-3, 1e4, 57) {
        for f in [0.0, 0.03, 0.1, 0.3, 1.0] {
            let c: f64 = residuals(&[g1, f * g1])?.iter().map(|v| v * v).sum();
            if c < best.0 {
                best = (c, [g1, f * g1]);
            }
        }
    }
    let unweighted = d1.sigma.is_none();
    let opts = FitOptions {
        scale_covariance: unweighted,
        ..FitOptions::default()
    };
    let bounds = Bounds::new(vec![0.0, 0.0], vec![f64::INFINITY, f64::INFINITY])?;
    let mut fit = least_squares(residuals, &best.1, &["gamma1_khz", "gamma2_khz"], &bounds, opts)?;
    if unweighted {
        let rms = fit.residual_norm / ((2 * n) as f64).sqrt();
        fit.poor_fit = rms > 0.05;
    }
    Ok(fit)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonanceFitOptions {
    /// Orientation/disorder samples behind every model evaluation.
    pub samples: usize,
    /// Frozen seed (common random numbers across iterations).
    pub seed: u64,
}

impl Default for ResonanceFitOptions {
    fn default() -> Self {
        ResonanceFitOptions { samples: 200_000, seed: 1 }
    }
}

/// Result of [`fit_resonance`] with the Monte Carlo noise of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFit {
    pub fit: FitResult,
    /// Largest relative standard error of the modelled 1/T₁ at the optimum.
    pub model_noise_floor: f64,
}

/// Fits (n_f in ppm, γ_f/2π in MHz) to `1/T₁` (1/ms) against δ/2π (MHz);
/// every other bath parameter comes from `base`.
pub fn fit_resonance(data: &CurveSeries, base: &BathParams, opts: ResonanceFitOptions) -> Result<ResonanceFit> {
    if data.len() < 3 {
        return Err(Error::domain(format!("resonance fit needs >= 3 points, got {}", data.len())));
    }
    if data.x_unit != "MHz" || data.y_unit != "1/ms" {
        return Err(Error::domain(format!(
            "expected x in MHz and y in 1/ms, got '{}' and '{}'",
            data.x_unit, data.y_unit
        )));
    }
    let draws = EtaSamples::draw(base, opts.samples, opts.seed)?;
    let cache: RefCell<HashMap<u64, Vec<(f64, f64)>>> = RefCell::new(HashMap::new());
    // η and its standard error at every δ for one γ_f; n_f enters analytically
    let etas = |gf_mhz: f64| -> Vec<(f64, f64)> {
        if let Some(v) = cache.borrow().get(&gf_mhz.to_bits()) {
            return v.clone();
        }
        let p = BathParams {
            gamma_f: AngularFrequency::from_mhz(gf_mhz),
            ..*base
        };
        let v: Vec<(f64, f64)> = data
            .x
            .iter()
            .map(|d| {
                let e = draws.evaluate(EtaModel::Bare, AngularFrequency::from_mhz(*d), &p);
                (e.eta, e.std_error)
            })
            .collect();
        cache.borrow_mut().insert(gf_mhz.to_bits(), v.clone());
        v
    };
    let model = |n_ppm: f64, gf_mhz: f64| -> Result<Vec<f64>> {
        let n = ppm_to_density(n_ppm)?.0;
        let gf = AngularFrequency::from_mhz(gf_mhz).0;
        Ok(etas(gf_mhz)
            .iter()
            .map(|(eta, _)| {
                let a = 4.0 * PI * n * J0 * eta / 3.0;
                1e3 * a * a * PI / gf
            })
            .collect())
    };
    let residuals = |th: &[f64]| -> Result<Vec<f64>> {
        let m = model(th[0], th[1])?;
        Ok((0..data.len()).map(|i| (data.y[i] - m[i]) / data.weight_sigma(i)).collect())
    };
    let mut best = (f64::INFINITY, [16.0, 3.3]);
    for gf in logspace(0.3, 30.0, 15) {
        for n in logspace(1.0, 300.0, 25) {
            let c: f64 = residuals(&[n, gf])?.iter().map(|v| v * v).sum();
            if c < best.0 {
                best = (c, [n, gf]);
            }
        }
    }
    let unweighted = data.sigma.is_none();
    let fit_opts = FitOptions {
        scale_covariance: unweighted,
        ..FitOptions::default()
    };
    let bounds = Bounds::new(vec![1e-6, 1e-4], vec![f64::INFINITY, f64::INFINITY])?;
    let mut fit = least_squares(residuals, &best.1, &["n_f_ppm", "gamma_f_mhz"], &bounds, fit_opts)?;
    if unweighted {
        let scale = data.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        fit.poor_fit = fit.residual_norm / (data.len() as f64).sqrt() > 0.05 * scale;
    }
    let model_noise_floor = etas(fit.values[1]).iter().map(|(e, s)| 2.0 * s / e).fold(0.0, f64::max);
    Ok(ResonanceFit { fit, model_noise_floor })
}
