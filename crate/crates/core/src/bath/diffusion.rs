use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Length, Time};

/// Classical spin-diffusion estimate for a Gaussian polarization spot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinDiffusion {
    /// Diffusion constant a²/τ in nm²/µs.
    pub d: f64,
    /// Time w²/D at which the central density has halved.
    pub t_half: Time,
    pub w: Length,
}

impl SpinDiffusion {
    /// `e^{−r²/(2(w²+Dt))}/(2π(w²+Dt))`.
    pub fn profile(&self, t: Time, r: Length) -> f64 {
        let v = self.w.0 * self.w.0 + self.d * t.0;
        (-r.0 * r.0 / (2.0 * v)).exp() / (2.0 * PI * v)
    }
}

pub fn spin_diffusion_estimate(w: Length, a: Length, tau: Time) -> Result<SpinDiffusion> {
    for (name, v) in [("w", w.0), ("a", a.0), ("tau", tau.0)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::domain(format!("{name} must be positive, got {v}")));
        }
    }
    let d = a.0 * a.0 / tau.0;
    Ok(SpinDiffusion {
        d,
        t_half: Time(w.0 * w.0 / d),
        w,
    })
}
