use serde::{Deserialize, Serialize};

use super::eta::{compute_eta_with, EtaModel, EtaSamples};
use super::{analytic_t, BathParams};
use crate::error::{Error, Result};
use crate::fit::CurveSeries;
use crate::units::{AngularFrequency, Time};

/// `1/T₁(δ)` in 1/ms (kHz) against δ/2π in MHz.
///
/// All grid points share one set of random draws, so the curve is smooth and
/// exactly even in δ when the grid is symmetric.
pub fn resonance_curve(delta_grid: &[AngularFrequency], params: &BathParams, samples: usize, seed: u64) -> Result<CurveSeries> {
    if delta_grid.is_empty() {
        return Err(Error::domain("empty detuning grid"));
    }
    let mut y = Vec::with_capacity(delta_grid.len());
    let mut sigma = Vec::with_capacity(delta_grid.len());
    let draws = EtaSamples::draw(params, samples, seed)?;
    for d in delta_grid {
        let est = draws.evaluate(EtaModel::Bare, *d, params);
        let inv_t = 1e3 / analytic_t(params, est.eta)?.0;
        y.push(inv_t);
        sigma.push((2.0 * est.std_error / est.eta * inv_t).max(f64::MIN_POSITIVE));
    }
    let x = delta_grid.iter().map(|d| d.mhz()).collect();
    Ok(CurveSeries::new(x, y, Some(sigma), "MHz", "1/ms")?
        .with_meta("quantity", "inverse T1 vs group splitting")
        .with_meta("samples", samples)
        .with_meta("disorder", params.disorder.label()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinLockMode {
    /// 12·T₁.
    #[default]
    Ideal,
    /// Dressed-basis spectral factors at Rabi frequency Ω.
    Full,
}

/// Spin-lock lifetime T₁^ρ at Rabi frequency Ω and group splitting δ.
pub fn spinlock_lifetime(
    omega: AngularFrequency,
    delta: AngularFrequency,
    params: &BathParams,
    mode: SpinLockMode,
    samples: usize,
    seed: u64,
) -> Result<Time> {
    if !(omega.0 >= 0.0) {
        return Err(Error::domain(format!("Rabi frequency must be >= 0, got {omega}")));
    }
    match mode {
        SpinLockMode::Ideal => {
            let est = compute_eta_with(EtaModel::Bare, delta, params, samples, seed)?;
            Ok(Time(12.0 * analytic_t(params, est.eta)?.0))
        }
        SpinLockMode::Full => {
            let est = compute_eta_with(EtaModel::SpinLock { omega }, delta, params, samples, seed)?;
            analytic_t(params, est.eta)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: usize = 50_000;

    #[test]
    fn curve_is_even_and_peaked() {
        let p = BathParams::reference_fit();
        let grid: Vec<AngularFrequency> = [-60.0, -20.0, 0.0, 20.0, 60.0]
            .iter()
            .map(|m| AngularFrequency::from_mhz(*m))
            .collect();
        let c = resonance_curve(&grid, &p, N, 2).unwrap();
        assert!((c.y[0] - c.y[4]).abs() < 1e-12 * c.y[0]);
        assert!((c.y[1] - c.y[3]).abs() < 1e-12 * c.y[1]);
        assert!(c.y[2] > c.y[1] && c.y[1] > c.y[0]);
        assert!(resonance_curve(&[], &p, N, 2).is_err());
    }

    #[test]
    fn ideal_is_twelve_times_t1() {
        let p = BathParams::reference_fit();
        let d = AngularFrequency::from_mhz(200.0);
        let est = compute_eta_with(EtaModel::Bare, d, &p, N, 5).unwrap();
        let t1 = analytic_t(&p, est.eta).unwrap();
        let t = spinlock_lifetime(AngularFrequency(0.0), d, &p, SpinLockMode::Ideal, N, 5).unwrap();
        assert_eq!(t.0, 12.0 * t1.0);
    }

    #[test]
    fn full_mode_limits() {
        let p = BathParams::reference_fit();
        let d = AngularFrequency::from_mhz(200.0);
        let est = compute_eta_with(EtaModel::Bare, d, &p, N, 5).unwrap();
        let t1 = analytic_t(&p, est.eta).unwrap().0;
        let t0 = spinlock_lifetime(AngularFrequency(0.0), d, &p, SpinLockMode::Full, N, 5).unwrap().0;
        assert!((t0 / t1 - 1.0).abs() < 0.3, "{}", t0 / t1);
        let mut prev = 0.0;
        for mhz in [1.0, 3.0, 10.0, 30.0] {
            let t = spinlock_lifetime(AngularFrequency::from_mhz(mhz), d, &p, SpinLockMode::Full, N, 5)
                .unwrap()
                .0;
            assert!(t >= prev);
            prev = t;
        }
        assert!(spinlock_lifetime(AngularFrequency(-1.0), d, &p, SpinLockMode::Full, N, 5).is_err());
    }
}
