//! Many-fluctuator statistics around a probe spin.
//!
//! Each probe spin sees a Poisson cloud of fluctuators; its depolarization
//! rate is the sum of single-fluctuator golden-rule rates. The sum of
//! `A/r⁶` terms over a homogeneous 3D point process is Lévy distributed,
//! which yields the stretched-exponential ensemble decay `e^{−√(t/T)}`.

mod diffusion;
mod distribution;
mod ensemble;
mod eta;
mod resonance;

pub use diffusion::{spin_diffusion_estimate, SpinDiffusion};
pub use distribution::{laplace_check, rho_gamma, DecayDistribution};
pub use ensemble::{ensemble_polarization, sample_effective_rates, EnsembleOptions};
pub use eta::{adaptive_outer_cutoff, analytic_t, compute_eta, compute_eta_with, EtaEstimate, EtaModel, EtaSamples};
pub use resonance::{resonance_curve, spinlock_lifetime, SpinLockMode};

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::dipolar::{coeffs_unchecked, field_aligned_partner};
use crate::error::{Error, Result};
use crate::oracle::golden_rule_rate_raw;
use crate::rng::{self, Domain};
use crate::units::{make_frame, ppm_to_density, AngularFrequency, Frame, Length, NumberDensity, NvAxis, Vec3, FWHM_PER_SIGMA, J0};

/// How the inhomogeneous linewidth W enters a spin–fluctuator detuning.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderConvention {
    /// Each particle has its own Gaussian detuning of FWHM W; pairs see the
    /// difference (FWHM √2·W).
    #[default]
    PairDifference,
    /// The pair detuning itself is Gaussian with FWHM W.
    SingleGaussian,
}

impl DisorderConvention {
    /// Standard deviation of a single particle's detuning.
    pub fn particle_sigma(self, w: AngularFrequency) -> f64 {
        let s = w.0 / FWHM_PER_SIGMA;
        match self {
            DisorderConvention::PairDifference => s,
            DisorderConvention::SingleGaussian => s / std::f64::consts::SQRT_2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DisorderConvention::PairDifference => "pair_difference",
            DisorderConvention::SingleGaussian => "single_gaussian",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    pub n_f: NumberDensity,
    pub gamma_f: AngularFrequency,
    /// Inhomogeneous FWHM.
    pub w: AngularFrequency,
    pub r_inner: Length,
    pub r_outer: Length,
    /// Probability of each orientation group A–D.
    pub group_weights: [f64; 4],
    pub probe_group: NvAxis,
    pub disorder: DisorderConvention,
}

impl BathParams {
    /// n_f = 16 ppm, γ_f = (2π)·3.3 MHz, W = (2π)·9 MHz, r₀ = 0.5 nm, R = 40 nm.
    pub fn reference_fit() -> Self {
        BathParams {
            n_f: ppm_to_density(16.0).expect("valid"),
            gamma_f: AngularFrequency::from_mhz(3.3),
            w: AngularFrequency::from_mhz(9.0),
            r_inner: Length(0.5),
            r_outer: Length(40.0),
            group_weights: [0.25; 4],
            probe_group: NvAxis::B,
            disorder: DisorderConvention::PairDifference,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_f.0 >= 0.0) || !self.n_f.0.is_finite() {
            return Err(Error::domain(format!("n_f must be >= 0, got {}", self.n_f)));
        }
        if !(self.gamma_f.0 > 0.0) || !self.gamma_f.0.is_finite() {
            return Err(Error::domain(format!("gamma_f must be > 0, got {}", self.gamma_f)));
        }
        if !(self.w.0 >= 0.0) || !self.w.0.is_finite() {
            return Err(Error::domain(format!("W must be >= 0, got {}", self.w)));
        }
        if !(self.r_inner.0 > 0.0 && self.r_inner.0 < self.r_outer.0) || !self.r_outer.0.is_finite() {
            return Err(Error::domain(format!(
                "need 0 < r0 < R, got r0 = {}, R = {}",
                self.r_inner, self.r_outer
            )));
        }
        let sum: f64 = self.group_weights.iter().sum();
        if self.group_weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "group weights must be >= 0 and sum to 1, got {:?}",
                self.group_weights
            )));
        }
        Ok(())
    }

    /// Expected fluctuator count in the shell r₀ < r < R.
    pub fn expected_count(&self) -> f64 {
        self.n_f.0 * 4.0 / 3.0 * std::f64::consts::PI * (self.r_outer.0.powi(3) - self.r_inner.0.powi(3))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fluctuator {
    pub position: Vec3,
    pub group: NvAxis,
    pub detuning: AngularFrequency,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FluctuatorBath {
    pub fluctuators: Vec<Fluctuator>,
}

/// One bath realization, drawn from stream 0 of the bath domain.
pub fn sample_bath(params: &BathParams, seed: u64) -> Result<FluctuatorBath> {
    params.validate()?;
    Ok(sample_bath_with(params, &mut rng::stream(seed, Domain::BathConfig, 0)))
}

/// Draws a bath from `rng`: Poisson count, positions uniform in the shell,
/// multinomial groups and Gaussian detunings.
pub fn sample_bath_with<R: Rng>(params: &BathParams, rng: &mut R) -> FluctuatorBath {
    let mean = params.expected_count();
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    let (r0c, rc) = (params.r_inner.0.powi(3), params.r_outer.0.powi(3));
    let sigma = params.disorder.particle_sigma(params.w);
    let mut cumulative = [0.0; 4];
    let mut acc = 0.0;
    for (c, w) in cumulative.iter_mut().zip(params.group_weights) {
        acc += w;
        *c = acc;
    }
    let mut fluctuators = Vec::with_capacity(count);
    for _ in 0..count {
        let r = (r0c + rng.random::<f64>() * (rc - r0c)).cbrt();
        let d: [f64; 3] = UnitSphere.sample(rng);
        let u: f64 = rng.random::<f64>() * acc;
        let g = cumulative.iter().position(|c| u < *c).unwrap_or(3);
        let detuning = gaussian(rng, sigma);
        fluctuators.push(Fluctuator {
            position: Vec3::new(d[0], d[1], d[2]) * r,
            group: NvAxis::from_index(g).expect("index < 4"),
            detuning: AngularFrequency(detuning),
        });
    }
    FluctuatorBath { fluctuators }
}

pub(crate) fn gaussian<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("sigma > 0").sample(rng)
    } else {
        0.0
    }
}

/// Frames of the probe and of a resonant fluctuator in the same or the
/// partner group. Rates depend on |g + ih| only, so any gauge will do.
pub(crate) fn pair_frames(probe: NvAxis) -> (Frame, Frame, Frame) {
    let s = Frame::for_group(probe, 0.0);
    let p = make_frame(field_aligned_partner(probe.partner()), 0.0).expect("unit axis");
    (s, s, p)
}

/// Total golden-rule rate on a probe spin of `spin_group` with detuning
/// `spin_detuning`.
///
/// Same-group fluctuators see δω = Δ_f − Δ_s; the partner group adds the
/// splitting δ; the remaining two groups are far detuned and contribute 0.
pub fn effective_rate(
    bath: &FluctuatorBath,
    spin_group: NvAxis,
    spin_detuning: AngularFrequency,
    delta: AngularFrequency,
    gamma_f: AngularFrequency,
) -> Result<AngularFrequency> {
    if !(gamma_f.0 > 0.0) {
        return Err(Error::domain(format!("gamma_f must be > 0, got {gamma_f}")));
    }
    Ok(AngularFrequency(effective_rate_unchecked(
        bath,
        spin_group,
        spin_detuning.0,
        delta.0,
        gamma_f.0,
    )))
}

pub(crate) fn effective_rate_unchecked(bath: &FluctuatorBath, spin_group: NvAxis, ds: f64, delta: f64, gf: f64) -> f64 {
    let (fs, f_same, f_partner) = pair_frames(spin_group);
    let partner = spin_group.partner();
    let mut total = 0.0;
    for f in &bath.fluctuators {
        let (frame, dw) = if f.group == spin_group {
            (&f_same, f.detuning.0 - ds)
        } else if f.group == partner {
            (&f_partner, f.detuning.0 - ds + delta)
        } else {
            continue;
        };
        let r2 = f.position.norm_squared();
        let r = r2.sqrt();
        let c = coeffs_unchecked(&fs, frame, &(f.position / r));
        let strength = J0 * J0 / (r2 * r2 * r2) * c.flip_flop_weight();
        total += golden_rule_rate_raw(strength, dw, gf);
    }
    total
}
