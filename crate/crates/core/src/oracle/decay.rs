//! Transition-rate extraction from brute-force propagation.

use serde::{Deserialize, Serialize};

use super::{
    build_secular_hdd_with_coupling, local_hamiltonian, DecayChannel, DensityMatrix9, LindbladPropagator, PropagatorOptions, SpinState,
};
use crate::error::{Error, Result};
use crate::numerics::linear_regression;
use crate::units::{AngularFrequency, Frame, Time, Vec3, J0};

/// One spin–fluctuator configuration to propagate.
#[derive(Clone, Copy, Debug)]
pub struct OracleSetup {
    pub r_vec: Vec3,
    pub frame_s: Frame,
    pub frame_f: Frame,
    /// Spin level spacing minus fluctuator level spacing.
    pub detuning: AngularFrequency,
    pub gamma_f: AngularFrequency,
    pub t_max: Time,
    /// Dipolar prefactor; [`J0`] unless deliberately switched off.
    pub coupling: f64,
    pub options: PropagatorOptions,
}

impl OracleSetup {
    pub fn new(r_vec: Vec3, frame_s: Frame, frame_f: Frame, detuning: AngularFrequency, gamma_f: AngularFrequency, t_max: Time) -> Self {
        OracleSetup {
            r_vec,
            frame_s,
            frame_f,
            detuning,
            gamma_f,
            t_max,
            coupling: J0,
            options: PropagatorOptions {
                eigen_check_stride: 16,
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OracleRate {
    /// Single-channel rate γ, comparable to the golden-rule formula.
    pub transition_rate: AngularFrequency,
    /// Fitted decay rate of P₀ − P₊₁, equal to 3γ for the symmetric ladder.
    pub population_decay_rate: AngularFrequency,
    pub log_rms_residual: f64,
    pub non_exponential: bool,
    pub points_used: usize,
    /// End of the fitted window in µs.
    pub t_end: Time,
}

const FLOOR: f64 = 0.1;
const MAX_LOG_RMS: f64 = 0.02;
const MIN_POINTS: usize = 5;

/// Propagates the spin from |0⟩ with the fluctuator maximally mixed and fits
/// ln(P₀ − P₊₁) against t over the first decade of decay.
///
/// Sampling is done twice: a coarse pass over `[0, t_max]` locates the end of
/// the first decade, then a pass with 100 samples inside that window feeds
/// the regression. Times below 3/γ_f are skipped so the fluctuator memory has
/// decayed.
pub fn oracle_decay_rate(setup: &OracleSetup) -> Result<OracleRate> {
    let gf = setup.gamma_f.0;
    if !(gf > 0.0) {
        return Err(Error::domain(format!("fluctuator rate must be positive, got {}", setup.gamma_f)));
    }
    if !(setup.t_max.0 > 0.0) {
        return Err(Error::domain(format!("t_max must be positive, got {}", setup.t_max)));
    }
    let t_skip = 3.0 / gf;
    if setup.t_max.0 <= t_skip {
        return Err(Error::domain(format!("t_max must exceed 3/gamma_f = {t_skip} us")));
    }
    let dw = setup.detuning.0;
    let h = local_hamiltonian([dw, 0.0, -dw], [0.0; 3])
        + build_secular_hdd_with_coupling(&setup.r_vec, &setup.frame_s, &setup.frame_f, setup.coupling)?;
    let rho0 = DensityMatrix9::spin_state_with_mixed_fluctuator(SpinState::Zero);
    let channels = DecayChannel::full_set(setup.gamma_f);

    let sample = |times: &[f64]| -> Result<Vec<f64>> {
        let mut p = LindbladPropagator::new(&rho0, &h, &channels, setup.options)?;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            p.advance_to(t)?;
            out.push(population_difference(p.matrix()));
            if *out.last().unwrap() < 0.5 * FLOOR {
                break;
            }
        }
        let d = p.diagnostics();
        if d.max_trace_error > 1e-9 || d.max_hermiticity_error > 1e-9 || d.min_eigenvalue < -1e-7 {
            return Err(Error::Numerical {
                message: "oracle propagation violated state invariants".into(),
                diagnostics: format!("{d:?}"),
            });
        }
        Ok(out)
    };

    let pilot_t: Vec<f64> = (1..=400).map(|k| setup.t_max.0 * k as f64 / 400.0).collect();
    let pilot = sample(&pilot_t)?;
    let t_decade = pilot
        .iter()
        .zip(&pilot_t)
        .find(|(d, _)| **d < FLOOR)
        .map(|(_, t)| *t)
        .unwrap_or(setup.t_max.0);

    let fine_t: Vec<f64> = (1..=100).map(|k| t_decade * k as f64 / 100.0).collect();
    let fine = sample(&fine_t)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = fine_t
        .iter()
        .zip(&fine)
        .filter(|(t, d)| **t >= t_skip && **d >= FLOOR)
        .map(|(t, d)| (*t, d.ln()))
        .unzip();
    let points_used = xs.len();
    if points_used < 2 {
        return Err(Error::Numerical {
            message: "too few samples inside the first decade of decay".into(),
            diagnostics: format!("t_decade = {t_decade} us, skip = {t_skip} us"),
        });
    }
    let fit = linear_regression(&xs, &ys)?;
    let decay = -fit.slope;
    Ok(OracleRate {
        transition_rate: AngularFrequency(decay / 3.0),
        population_decay_rate: AngularFrequency(decay),
        log_rms_residual: fit.rms_residual,
        non_exponential: fit.rms_residual > MAX_LOG_RMS || points_used < MIN_POINTS,
        points_used,
        t_end: Time(*xs.last().unwrap()),
    })
}

fn population_difference(rho: &super::CMatrix9) -> f64 {
    let (mut p_plus, mut p_zero) = (0.0, 0.0);
    for a in 0..3 {
        p_plus += rho[(a, a)].re;
        p_zero += rho[(3 + a, 3 + a)].re;
    }
    p_zero - p_plus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dipolar::coeffs_ghq;
    use crate::oracle::golden_rule_rate;
    use crate::units::{make_frame, Length, NvAxis};
    use std::f64::consts::PI;

    const GF: f64 = 2.0 * PI * 3.3;

    fn setup(r: f64, dw: f64, t_max: f64) -> OracleSetup {
        let rv = Vec3::new(0.3, -0.5, 0.81).normalize() * r;
        let fs = make_frame(NvAxis::A.direction(), 0.0).unwrap();
        let ff = make_frame(NvAxis::A.direction(), 0.0).unwrap();
        OracleSetup::new(rv, fs, ff, AngularFrequency(dw), AngularFrequency(GF), Time(t_max))
    }

    #[test]
    fn five_nm_resonant_rate_matches_golden_rule() {
        let s = setup(5.0, 0.0, 50.0);
        let out = oracle_decay_rate(&s).unwrap();
        let c = coeffs_ghq(&s.frame_s, &s.frame_f, &s.r_vec.normalize()).unwrap();
        let gold = golden_rule_rate(Length(5.0), c.g, c.h, AngularFrequency(0.0), AngularFrequency(GF)).unwrap();
        let ratio = out.transition_rate.0 / gold.0;
        assert!((ratio - 1.0).abs() < 0.15, "ratio {ratio}, {out:?}");
        assert!(!out.non_exponential, "{out:?}");
    }

    #[test]
    fn zero_coupling_gives_zero_rate() {
        let mut s = setup(6.0, 0.0, 20.0);
        s.coupling = 0.0;
        let out = oracle_decay_rate(&s).unwrap();
        assert!(out.transition_rate.0.abs() < 1e-9, "{out:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut s = setup(6.0, 0.0, 0.01);
        assert!(oracle_decay_rate(&s).is_err());
        s.t_max = Time(10.0);
        s.gamma_f = AngularFrequency(0.0);
        assert!(oracle_decay_rate(&s).is_err());
    }
}
