use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gaussian, pair_frames, BathParams};
use crate::dipolar::{coeffs_unchecked, CHUNK};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::units::{AngularFrequency, Length, Time, Vec3, J0};

/// Which spectral factor enters the dimensionless coupling s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum EtaModel {
    /// `s² = (2/3)|g+ih|²·L(δω)` with `L(x) = 2γ_f²/(x² + 4γ_f²)`.
    #[default]
    Bare,
    /// Spin-locked probe at Rabi frequency Ω. Same-group exchange in the
    /// dressed basis carries 1/12 of the bare weight at mismatch Ω/2, plus a
    /// dressed-state flip-flop at mismatch Ω. Partner-group terms are bare.
    SpinLock { omega: AngularFrequency },
}

/// Monte Carlo estimate of η = ⟨s⟩ over orientation, disorder and group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    pub eta: f64,
    pub std_error: f64,
    /// Group-weighted ⟨s²⟩, which sets the mean rate of a distant shell.
    pub mean_s2: f64,
    /// ⟨s⟩ for a same-group and for a partner-group fluctuator.
    pub same: f64,
    pub partner: f64,
    pub samples: usize,
}

#[inline]
fn lorentz(x: f64, gf: f64) -> f64 {
    2.0 * gf * gf / (x * x + 4.0 * gf * gf)
}

fn unit<R: Rng>(rng: &mut R) -> Vec3 {
    let d: [f64; 3] = UnitSphere.sample(rng);
    Vec3::new(d[0], d[1], d[2])
}

/// η(δ) with the bare spectral factor.
pub fn compute_eta(delta: AngularFrequency, params: &BathParams, samples: usize, seed: u64) -> Result<EtaEstimate> {
    compute_eta_with(EtaModel::Bare, delta, params, samples, seed)
}

/// η(δ) for a given spectral model.
///
/// Every sample draws a same-group and a partner-group fluctuator with
/// uniform separation direction and a pair detuning ±d from the disorder
/// convention. Draws depend only on `seed`, so curves over δ or Ω use
/// common random numbers.
pub fn compute_eta_with(model: EtaModel, delta: AngularFrequency, params: &BathParams, samples: usize, seed: u64) -> Result<EtaEstimate> {
    let draws = EtaSamples::draw(params, samples, seed)?;
    Ok(draws.evaluate(model, delta, params))
}

/// Frozen orientation and disorder draws, reusable across δ, Ω, γ_f and n_f.
#[derive(Clone, Debug)]
pub struct EtaSamples {
    m2_same: Vec<f64>,
    m2_partner: Vec<f64>,
    d_same: Vec<f64>,
    d_partner: Vec<f64>,
}

impl EtaSamples {
    /// Draws use the probe group, the disorder convention and W from `params`.
    pub fn draw(params: &BathParams, samples: usize, seed: u64) -> Result<Self> {
        params.validate()?;
        if samples < 10_000 {
            return Err(Error::domain(format!("eta needs >= 1e4 samples, got {samples}")));
        }
        let sigma = params.disorder.particle_sigma(params.w);
        let (fs, f_same, f_partner) = pair_frames(params.probe_group);
        let n_chunks = samples.div_ceil(CHUNK);
        let chunks: Vec<[Vec<f64>; 4]> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = rng::stream(seed, Domain::EtaSamples, c as u64);
                let len = CHUNK.min(samples - c * CHUNK);
                let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(len));
                for _ in 0..len {
                    out[0].push(coeffs_unchecked(&fs, &f_same, &unit(&mut rng)).flip_flop_weight());
                    out[1].push(coeffs_unchecked(&fs, &f_partner, &unit(&mut rng)).flip_flop_weight());
                    out[2].push(gaussian(&mut rng, sigma) - gaussian(&mut rng, sigma));
                    out[3].push(gaussian(&mut rng, sigma) - gaussian(&mut rng, sigma));
                }
                out
            })
            .collect();
        let mut s = EtaSamples {
            m2_same: vec![],
            m2_partner: vec![],
            d_same: vec![],
            d_partner: vec![],
        };
        for [a, b, c, d] in chunks {
            s.m2_same.extend(a);
            s.m2_partner.extend(b);
            s.d_same.extend(c);
            s.d_partner.extend(d);
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.m2_same.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m2_same.is_empty()
    }

    /// η for splitting δ with γ_f and group weights taken from `params`.
    /// Disorder enters at ±d (antithetic pairs), which keeps every estimate
    /// exactly even in δ.
    pub fn evaluate(&self, model: EtaModel, delta: AngularFrequency, params: &BathParams) -> EtaEstimate {
        let gf = params.gamma_f.0;
        let w_same = params.group_weights[params.probe_group.index()];
        let w_partner = params.group_weights[params.probe_group.partner().index()];
        let d = delta.0;
        let n = self.len();
        // per chunk: Σs_same, Σs_partner, Σx, Σx², Σ weighted s²
        let partial: Vec<[f64; 5]> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = [0.0; 5];
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let (m2s, m2p) = (self.m2_same[i], self.m2_partner[i]);
                    let mut s_same = 0.0;
                    let mut s_partner = 0.0;
                    let mut s2 = 0.0;
                    for sign in [1.0, -1.0] {
                        let (ds, dp) = (sign * self.d_same[i], sign * self.d_partner[i]);
                        let a = match model {
                            EtaModel::Bare => 2.0 / 3.0 * m2s * lorentz(ds, gf),
                            EtaModel::SpinLock { omega } => {
                                let o = omega.0;
                                2.0 / 3.0 * m2s * (lorentz(ds + 0.5 * o, gf) / 12.0 + lorentz(ds + o, gf))
                            }
                        };
                        let b = 2.0 / 3.0 * m2p * lorentz(dp + d, gf);
                        s_same += 0.5 * a.sqrt();
                        s_partner += 0.5 * b.sqrt();
                        s2 += 0.5 * (w_same * a + w_partner * b);
                    }
                    let x = w_same * s_same + w_partner * s_partner;
                    acc[0] += s_same;
                    acc[1] += s_partner;
                    acc[2] += x;
                    acc[3] += x * x;
                    acc[4] += s2;
                }
                acc
            })
            .collect();
        let mut tot = [0.0; 5];
        for p in &partial {
            for k in 0..5 {
                tot[k] += p[k];
            }
        }
        let nf = n as f64;
        let eta = tot[2] / nf;
        let var = (tot[3] / nf - eta * eta).max(0.0) * nf / (nf - 1.0);
        EtaEstimate {
            eta,
            std_error: (var / nf).sqrt(),
            mean_s2: tot[4] / nf,
            same: tot[0] / nf,
            partner: tot[1] / nf,
            samples: n,
        }
    }
}

/// `1/T = (4π n_f J₀ η/3)²·π/γ_f`.
pub fn analytic_t(params: &BathParams, eta: f64) -> Result<Time> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::domain(format!("eta must be positive, got {eta}")));
    }
    if !(params.n_f.0 > 0.0) {
        return Err(Error::domain("n_f must be positive for a finite T"));
    }
    if !(params.gamma_f.0 > 0.0) {
        return Err(Error::domain(format!("gamma_f must be > 0, got {}", params.gamma_f)));
    }
    let a = 4.0 * PI * params.n_f.0 * J0 * eta / 3.0;
    Ok(Time(params.gamma_f.0 / (a * a * PI)))
}

/// Smallest R such that fluctuators beyond R add a mean rate below
/// `fraction/T`; the shell beyond R contributes `4π n_f J₀²⟨s²⟩/(3γ_f R³)`.
pub fn adaptive_outer_cutoff(params: &BathParams, est: &EtaEstimate, fraction: f64) -> Result<Length> {
    if !(fraction > 0.0) {
        return Err(Error::domain("tail fraction must be positive"));
    }
    let t = analytic_t(params, est.eta)?;
    let r3 = 4.0 * PI * params.n_f.0 * J0 * J0 * est.mean_s2 * t.0 / (3.0 * params.gamma_f.0 * fraction);
    Ok(Length(r3.cbrt().max(2.0 * params.r_inner.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dipolar::{DIFFERENT_GROUP_AVERAGE, SAME_GROUP_AVERAGE};
    use crate::units::NumberDensity;

    #[test]
    fn zero_width_resonant_reduction() {
        let p = BathParams {
            w: AngularFrequency(0.0),
            ..BathParams::reference_fit()
        };
        let est = compute_eta(AngularFrequency(0.0), &p, 400_000, 7).unwrap();
        let want = 0.25 * (1.0f64 / 3.0).sqrt() * (SAME_GROUP_AVERAGE + DIFFERENT_GROUP_AVERAGE);
        assert!((est.eta - want).abs() < 4.0 * est.std_error + 2e-4, "{} vs {want}", est.eta);
    }

    #[test]
    fn far_detuned_partner_drops_out() {
        let p = BathParams {
            w: AngularFrequency(0.0),
            ..BathParams::reference_fit()
        };
        let est = compute_eta(AngularFrequency(1e6), &p, 100_000, 7).unwrap();
        assert!(est.partner < 1e-4);
        let want = 0.25 * (1.0f64 / 3.0).sqrt() * SAME_GROUP_AVERAGE;
        assert!((est.eta - want).abs() < 4.0 * est.std_error + 1e-4);
    }

    #[test]
    fn even_in_delta() {
        let p = BathParams::reference_fit();
        let a = compute_eta(AngularFrequency(30.0), &p, 50_000, 3).unwrap();
        let b = compute_eta(AngularFrequency(-30.0), &p, 50_000, 3).unwrap();
        assert!((a.eta - b.eta).abs() < 3.0 * (a.std_error + b.std_error));
    }

    #[test]
    fn t_scaling() {
        let p = BathParams::reference_fit();
        let t1 = analytic_t(&p, 0.1).unwrap();
        let q = BathParams {
            n_f: NumberDensity(2.0 * p.n_f.0),
            ..p
        };
        assert!((analytic_t(&q, 0.1).unwrap().0 * 4.0 - t1.0).abs() < 1e-12 * t1.0);
        assert!((analytic_t(&p, 0.2).unwrap().0 * 4.0 - t1.0).abs() < 1e-12 * t1.0);
        let g = BathParams {
            gamma_f: AngularFrequency(2.0 * p.gamma_f.0),
            ..p
        };
        assert!((analytic_t(&g, 0.1).unwrap().0 - 2.0 * t1.0).abs() < 1e-12 * t1.0);
        assert!(analytic_t(&p, 0.0).is_err());
    }
}
