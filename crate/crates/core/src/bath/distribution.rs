use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::numerics::integrate;
use crate::units::Time;

/// One-sided Lévy law of the ensemble rate,
/// `ρ(γ) = e^{−1/(4γT)}/√(4πγ³T)`, whose Laplace transform is `e^{−√(t/T)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayDistribution {
    pub t: Time,
}

impl DecayDistribution {
    pub fn new(t: Time) -> Result<Self> {
        if !(t.0 > 0.0) || !t.0.is_finite() {
            return Err(Error::domain(format!("T must be positive, got {t}")));
        }
        Ok(DecayDistribution { t })
    }

    /// Density at γ (in 1/µs); zero for γ ≤ 0.
    pub fn pdf(&self, gamma: f64) -> f64 {
        if gamma <= 0.0 {
            return 0.0;
        }
        let t = self.t.0;
        (-1.0 / (4.0 * gamma * t)).exp() / (4.0 * PI * gamma.powi(3) * t).sqrt()
    }

    pub fn cdf(&self, gamma: f64) -> f64 {
        if gamma <= 0.0 {
            return 0.0;
        }
        erfc(1.0 / (2.0 * (self.t.0 * gamma).sqrt()))
    }

    /// P(γ > g).
    pub fn tail(&self, gamma: f64) -> f64 {
        if gamma <= 0.0 {
            return 1.0;
        }
        erf(1.0 / (2.0 * (self.t.0 * gamma).sqrt()))
    }

    /// Most probable rate, 1/(6T).
    pub fn mode(&self) -> f64 {
        1.0 / (6.0 * self.t.0)
    }

    /// `c/Z²` with `Z ~ N(0,1)` and scale `c = 1/(2T)`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        1.0 / (2.0 * self.t.0 * z * z)
    }

    /// Quadrature of the density on (0, γ_max) plus the analytic tail.
    pub fn normalization(&self, gamma_max: f64) -> Result<f64> {
        if !(gamma_max > 0.0) {
            return Err(Error::domain("gamma_max must be positive"));
        }
        let lo = (1.0 / (4.0 * self.t.0 * 800.0)).ln();
        let hi = gamma_max.ln();
        let body = if hi > lo {
            integrate(|y| self.pdf(y.exp()) * y.exp(), lo, hi, 1e-13, 1e-12)?
        } else {
            0.0
        };
        Ok(body + self.tail(gamma_max))
    }

    /// `∫₀^∞ ρ(γ) e^{−γt} dγ` by quadrature in ln γ.
    pub fn laplace(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("t must be >= 0, got {t}")));
        }
        let big_t = self.t.0;
        let lo = (1.0 / (4.0 * big_t * 800.0)).ln();
        // beyond this the integrand is below e^{−700}·ρ or the tail is < 1e-16
        let tail_cut = 1.0 / (4.0 * big_t) * 1e32;
        let hi = if t > 0.0 { (700.0 / t).min(tail_cut) } else { tail_cut }.ln();
        let f = |y: f64| {
            let g = y.exp();
            self.pdf(g) * (-g * t).exp() * g
        };
        // split at the mode and at 1/t where the integrand changes shape
        let mut knots = vec![lo, self.mode().ln()];
        if t > 0.0 {
            knots.push((1.0 / t).ln());
        }
        knots.push(hi);
        knots.retain(|k| *k >= lo && *k <= hi);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut total = 0.0;
        for w in knots.windows(2) {
            total += integrate(f, w[0], w[1], 1e-15, 1e-12)?;
        }
        Ok(total)
    }
}

/// `ρ(γ; T)`; errors for γ ≤ 0 or T ≤ 0.
pub fn rho_gamma(gamma: f64, t: Time) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
    }
    Ok(DecayDistribution::new(t)?.pdf(gamma))
}

/// `∫₀^∞ ρ(γ; T) e^{−γt} dγ` by adaptive quadrature.
pub fn laplace_check(t_scale: Time, t: Time) -> Result<f64> {
    DecayDistribution::new(t_scale)?.laplace(t.0)
}
