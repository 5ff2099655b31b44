//! Secular dipolar coupling coefficients and their orientation averages.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::units::{make_frame, Frame, Length, NvAxis, Vec3, J0};

/// Orientation factors of the secular dipolar Hamiltonian.
///
/// `g + i h` multiplies the flip-flop terms and `q` the Ising term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipolarCoefficients {
    pub g: f64,
    pub h: f64,
    pub q: f64,
}

impl DipolarCoefficients {
    /// |g + i h|², the gauge-invariant flip-flop weight.
    pub fn flip_flop_weight(&self) -> f64 {
        self.g * self.g + self.h * self.h
    }
}

/// Which pair of NV groups an interaction couples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairingKind {
    SameGroup,
    DifferentGroup(NvAxis, NvAxis),
}

impl Default for PairingKind {
    fn default() -> Self {
        PairingKind::DifferentGroup(NvAxis::B, NvAxis::C)
    }
}

/// Quantization axis of a partner group when it is tuned into resonance.
///
/// The two groups share a transition frequency when the external field has
/// equal projection on both axes; with each axis oriented along its positive
/// field projection the partner direction is the reversed crystallographic
/// axis, so that ẑ_s·ẑ_f = +1/3.
pub fn field_aligned_partner(axis: NvAxis) -> Vec3 {
    -axis.direction()
}

impl PairingKind {
    /// Spin and fluctuator quantization axes for this pairing.
    pub fn axes(&self) -> Result<(Vec3, Vec3)> {
        match *self {
            PairingKind::SameGroup => Ok((NvAxis::B.direction(), NvAxis::B.direction())),
            PairingKind::DifferentGroup(a, b) if a != b => Ok((a.direction(), field_aligned_partner(b))),
            PairingKind::DifferentGroup(a, _) => Err(Error::domain(format!("different-group pairing needs distinct axes, got {a} twice"))),
        }
    }
}

/// Evaluates g, h and q for spin frame `s`, fluctuator frame `f` and the unit
/// separation vector `r_hat`.
pub fn coeffs_ghq(s: &Frame, f: &Frame, r_hat: &Vec3) -> Result<DipolarCoefficients> {
    let norm = r_hat.norm();
    if !((norm - 1.0).abs() <= 1e-9) {
        return Err(Error::domain(format!("separation direction must be a unit vector, |r| = {norm}")));
    }
    Ok(coeffs_unchecked(s, f, r_hat))
}

#[inline]
pub(crate) fn coeffs_unchecked(s: &Frame, f: &Frame, r: &Vec3) -> DipolarCoefficients {
    let (rxs, rys, rzs) = (r.dot(&s.x), r.dot(&s.y), r.dot(&s.z));
    let (rxf, ryf, rzf) = (r.dot(&f.x), r.dot(&f.y), r.dot(&f.z));
    let g = 0.5 * (3.0 * rxs * rxf - s.x.dot(&f.x) + 3.0 * rys * ryf - s.y.dot(&f.y));
    let h = 0.5 * (3.0 * rxs * ryf - s.x.dot(&f.y) - 3.0 * rys * rxf + s.y.dot(&f.x));
    let q = 3.0 * rzs * rzf - s.z.dot(&f.z);
    DipolarCoefficients { g, h, q }
}

/// (J₀/r³)²·(g² + h²) in rad²·µs⁻².
pub fn flip_flop_strength(r: Length, coeffs: &DipolarCoefficients) -> Result<f64> {
    if !(r.0 > 0.0) {
        return Err(Error::domain(format!("separation must be positive, got {r}")));
    }
    let j = J0 / r.0.powi(3);
    Ok(j * j * coeffs.flip_flop_weight())
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub(crate) const CHUNK: usize = 8192;

/// Draws a uniformly random separation direction and two uniform transverse
/// gauges, returning |g + i h| for the given quantization axes.
pub(crate) fn sample_flip_flop_magnitude<R: Rng>(rng: &mut R, zs: &Vec3, zf: &Vec3) -> f64 {
    let r: [f64; 3] = UnitSphere.sample(rng);
    let r = Vec3::new(r[0], r[1], r[2]);
    let fs = make_frame(*zs, rng.random::<f64>() * 2.0 * PI).expect("unit axis");
    let ff = make_frame(*zf, rng.random::<f64>() * 2.0 * PI).expect("unit axis");
    coeffs_unchecked(&fs, &ff, &r).flip_flop_weight().sqrt()
}

/// Orientation average ⟨√(g² + h²)⟩ for `kind`, with the separation direction
/// uniform on the sphere and both transverse gauges uniform.
///
/// Work is split into fixed-size chunks with their own random streams and the
/// chunk sums are reduced in order, so the result does not depend on the
/// number of worker threads.
pub fn angular_average_matrix_element(kind: PairingKind, samples: usize, seed: u64) -> Result<McEstimate> {
    if samples < 10_000 {
        return Err(Error::domain(format!("angular average needs >= 1e4 samples, got {samples}")));
    }
    let (zs, zf) = kind.axes()?;
    let n_chunks = samples.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, Domain::AngularAverage, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..len {
                let v = sample_flip_flop_magnitude(&mut rng, &zs, &zf);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

/// Closed-form same-group average 2/(3√3).
pub const SAME_GROUP_AVERAGE: f64 = 0.384_900_179_459_750_5;

/// Inter-group average (four-digit value).
pub const DIFFERENT_GROUP_AVERAGE: f64 = 0.6507;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_and_transverse_cases() {
        let c = Frame::canonical();
        let z = coeffs_ghq(&c, &c, &Vec3::z()).unwrap();
        assert!((z.g + 1.0).abs() < 1e-15 && z.h.abs() < 1e-15 && (z.q - 2.0).abs() < 1e-15);
        let x = coeffs_ghq(&c, &c, &Vec3::x()).unwrap();
        assert!((x.g - 0.5).abs() < 1e-15 && x.h.abs() < 1e-15 && (x.q + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_unit_direction() {
        let c = Frame::canonical();
        assert!(coeffs_ghq(&c, &c, &Vec3::new(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn strength_examples() {
        let zero = DipolarCoefficients { g: 0.0, h: 0.0, q: 1.0 };
        assert_eq!(flip_flop_strength(Length(5.0), &zero).unwrap(), 0.0);
        let unit = DipolarCoefficients { g: 0.6, h: 0.8, q: 0.0 };
        let s5 = flip_flop_strength(Length(5.0), &unit).unwrap();
        // (2π·52/125)² = (2π·0.416)²
        assert!((s5 - 6.831_977).abs() < 1e-5, "{s5}");
        let s10 = flip_flop_strength(Length(10.0), &unit).unwrap();
        assert!((s5 / s10 - 64.0).abs() < 1e-10);
        assert!(flip_flop_strength(Length(0.0), &unit).is_err());
    }

    #[test]
    fn same_axes_pairing_rejected() {
        assert!(PairingKind::DifferentGroup(NvAxis::A, NvAxis::A).axes().is_err());
    }

    #[test]
    fn sample_count_guard() {
        assert!(angular_average_matrix_element(PairingKind::SameGroup, 100, 1).is_err());
    }
}
