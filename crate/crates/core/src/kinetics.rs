//! Classical three-level rate model over (P₋₁, P₀, P₊₁).
//!
//! γ₁ couples |Δm| = 1 levels and γ₂ the |Δm| = 2 pair. Rates are plain
//! decay constants (kHz = 1/ms), carried as [`Rate`] in 1/µs.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Rate, Time};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateGenerator3 {
    pub gamma1: Rate,
    pub gamma2: Rate,
}

impl RateGenerator3 {
    pub fn new(gamma1: Rate, gamma2: Rate) -> Result<Self> {
        for (name, g) in [("gamma1", gamma1), ("gamma2", gamma2)] {
            if !(g.0 >= 0.0) || !g.0.is_finite() {
                return Err(Error::domain(format!("{name} must be >= 0, got {g}")));
            }
        }
        Ok(RateGenerator3 { gamma1, gamma2 })
    }

    /// Generator in 1/µs; columns sum to zero.
    pub fn matrix(&self) -> Matrix3<f64> {
        let (g1, g2) = (self.gamma1.0, self.gamma2.0);
        Matrix3::new(-g1 - g2, g1, g2, g1, -2.0 * g1, g1, g2, g1, -g1 - g2)
    }
}

/// Probabilities of (−1, 0, +1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Populations3(pub [f64; 3]);

impl Populations3 {
    pub fn new(p: [f64; 3]) -> Result<Self> {
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain(format!("populations must lie in [0, 1], got {p:?}")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!("populations must sum to 1, got {s}")));
        }
        Ok(Populations3(p))
    }

    pub fn minus_one() -> Self {
        Populations3([1.0, 0.0, 0.0])
    }

    /// (P₋₁ − P₀, P₀ − P₊₁).
    pub fn differences(&self) -> (f64, f64) {
        (self.0[0] - self.0[1], self.0[1] - self.0[2])
    }
}

/// `P(t) = e^{tG}·P₀`.
pub fn evolve_populations(p0: &Populations3, gamma1: Rate, gamma2: Rate, t: Time) -> Result<Populations3> {
    if !(t.0 >= 0.0) {
        return Err(Error::domain(format!("t must be >= 0, got {t}")));
    }
    let g = RateGenerator3::new(gamma1, gamma2)?;
    let p = (g.matrix() * t.0).exp() * Vector3::from(p0.0);
    // round-off can leave values a few ulp outside [0, 1]
    let clamp = |v: f64| if v.abs() < 1e-14 { 0.0 } else { v.min(1.0) };
    Populations3::new([clamp(p[0]), clamp(p[1]), clamp(p[2])])
}

fn check_time(t: Time) -> Result<()> {
    if !(t.0 >= 0.0) {
        return Err(Error::domain(format!("t must be >= 0, got {t}")));
    }
    Ok(())
}

/// Closed-form `(d₁, d₂)` after initialization in |−1⟩:
/// `½e^{−(γ₁+2γ₂)t} ± ½e^{−3γ₁t}`.
pub fn population_diffs_analytic(gamma1: Rate, gamma2: Rate, t: Time) -> Result<(f64, f64)> {
    check_time(t)?;
    let a = 0.5 * (-(gamma1.0 + 2.0 * gamma2.0) * t.0).exp();
    let b = 0.5 * (-3.0 * gamma1.0 * t.0).exp();
    Ok((a + b, a - b))
}

/// Stretched variant `½e^{−√((γ₁+2γ₂)t)} ± ½e^{−√(3γ₁t)}`.
pub fn population_diffs_stretched(gamma1: Rate, gamma2: Rate, t: Time) -> Result<(f64, f64)> {
    check_time(t)?;
    let a = 0.5 * (-((gamma1.0 + 2.0 * gamma2.0) * t.0).sqrt()).exp();
    let b = 0.5 * (-(3.0 * gamma1.0 * t.0).sqrt()).exp();
    Ok((a + b, a - b))
}
