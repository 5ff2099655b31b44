//! Fluctuator spectral response and Born–Markov effective rates.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CMatrix9, SpinState};
use crate::error::{Error, Result};
use crate::units::{AngularFrequency, Length, J0};

/// Closed-form spectral response `S^{αβ}(ω)` of a fluctuator relaxing through
/// six equal-rate channels towards the maximally mixed state.
///
/// `(1/3)/(i(ω+ω_αβ) − 2γ_f)` for α ≠ β and `(1/9)(1/(iω) + 2/(iω − 3γ_f))`
/// for α = β. With this sign the real part is negative; the one-sided Laplace
/// transform of the correlation function is [`spectral_integral`] = −S.
pub fn spectral_response(
    omega: AngularFrequency,
    alpha: SpinState,
    beta: SpinState,
    omega_ab: AngularFrequency,
    gamma_f: AngularFrequency,
) -> Result<Complex64> {
    if !(gamma_f.0 > 0.0) {
        return Err(Error::domain(format!("fluctuator rate must be positive, got {gamma_f}")));
    }
    let i = Complex64::i();
    if alpha != beta {
        Ok((1.0 / 3.0) / (i * (omega.0 + omega_ab.0) - 2.0 * gamma_f.0))
    } else {
        if omega.0 == 0.0 {
            return Err(Error::Singular("diagonal spectral response diverges at omega = 0".into()));
        }
        let iw = i * omega.0;
        Ok((1.0 / 9.0) * (1.0 / iw + 2.0 / (iw - 3.0 * gamma_f.0)))
    }
}

/// `∫₀^∞ e^{iωτ} ⟨β|e^{τL₂}[|β⟩⟨α| ρ_thm]|α⟩ dτ`, equal to `−spectral_response`.
pub fn spectral_integral(
    omega: AngularFrequency,
    alpha: SpinState,
    beta: SpinState,
    omega_ab: AngularFrequency,
    gamma_f: AngularFrequency,
) -> Result<Complex64> {
    spectral_response(omega, alpha, beta, omega_ab, gamma_f).map(|s| -s)
}

/// Induced transition rates Γ (Γ_ij from spin state i to j) and energy
/// corrections Δ, both indexed in the (+1, 0, −1) ordering.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRates {
    pub gamma: Matrix3<f64>,
    pub delta: Matrix3<f64>,
}

/// Born–Markov rates `Γ_ij = 2 Σ_αβ |C^{ij}_{αβ}|² Re Ŝ^{αβ}(ω_ij)` and
/// `Δ_ij = 2 Σ_αβ |C^{ij}_{αβ}|² Im Ŝ^{αβ}(ω_ij)` where
/// `C^{ij}_{αβ} = ⟨iα|H_int|jβ⟩` and Ŝ is the positive-real-part transform.
///
/// Diagonal entries are zero by convention.
pub fn effective_rates(
    h_int: &CMatrix9,
    spin_energies: [f64; 3],
    fluctuator_energies: [f64; 3],
    gamma_f: AngularFrequency,
) -> Result<EffectiveRates> {
    let scale = h_int.norm().max(1e-300);
    if (h_int - h_int.adjoint()).norm() > 1e-12 * scale {
        return Err(Error::domain("interaction Hamiltonian is not Hermitian"));
    }
    let mut gamma = Matrix3::zeros();
    let mut delta = Matrix3::zeros();
    for i in SpinState::ALL {
        for j in SpinState::ALL {
            if i == j {
                continue;
            }
            let w_ij = spin_energies[i.index()] - spin_energies[j.index()];
            let (mut g_sum, mut d_sum) = (0.0, 0.0);
            for a in SpinState::ALL {
                for b in SpinState::ALL {
                    let c = h_int[(3 * i.index() + a.index(), 3 * j.index() + b.index())];
                    let weight = c.norm_sqr();
                    if weight == 0.0 {
                        continue;
                    }
                    let w_ab = fluctuator_energies[a.index()] - fluctuator_energies[b.index()];
                    let s = spectral_integral(AngularFrequency(w_ij), a, b, AngularFrequency(w_ab), gamma_f)?;
                    g_sum += 2.0 * weight * s.re;
                    d_sum += 2.0 * weight * s.im;
                }
            }
            gamma[(i.index(), j.index())] = g_sum;
            delta[(i.index(), j.index())] = d_sum;
        }
    }
    Ok(EffectiveRates { gamma, delta })
}

/// Golden-rule depolarization rate induced by one fluctuator,
/// `(J₀²/r⁶)(g²+h²)(2/3)·2γ_f/(δω² + 4γ_f²)`.
pub fn golden_rule_rate(r: Length, g: f64, h: f64, detuning: AngularFrequency, gamma_f: AngularFrequency) -> Result<AngularFrequency> {
    if !(r.0 > 0.0) {
        return Err(Error::domain(format!("separation must be positive, got {r}")));
    }
    if !(gamma_f.0 > 0.0) {
        return Err(Error::domain(format!("fluctuator rate must be positive, got {gamma_f}")));
    }
    let j = J0 / r.0.powi(3);
    Ok(AngularFrequency(golden_rule_rate_raw(
        j * j * (g * g + h * h),
        detuning.0,
        gamma_f.0,
    )))
}

/// Unchecked form taking the flip-flop strength `(J₀/r³)²(g²+h²)` directly.
#[inline]
pub fn golden_rule_rate_raw(flip_flop_strength: f64, detuning: f64, gamma_f: f64) -> f64 {
    flip_flop_strength * (2.0 / 3.0) * 2.0 * gamma_f / (detuning * detuning + 4.0 * gamma_f * gamma_f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{build_secular_hdd, product_index};
    use crate::units::{make_frame, NvAxis, Vec3};

    const GF: f64 = 2.0 * std::f64::consts::PI * 3.3;

    #[test]
    fn on_resonance_value_is_real() {
        let s = spectral_response(
            AngularFrequency(1.5),
            SpinState::Plus,
            SpinState::Zero,
            AngularFrequency(-1.5),
            AngularFrequency(GF),
        )
        .unwrap();
        assert!((s.re + 1.0 / (6.0 * GF)).abs() < 1e-15);
        assert_eq!(s.im, 0.0);
    }

    #[test]
    fn off_diagonal_real_part_is_lorentzian() {
        let at = |x: f64| {
            spectral_response(
                AngularFrequency(x),
                SpinState::Minus,
                SpinState::Zero,
                AngularFrequency(0.0),
                AngularFrequency(GF),
            )
            .unwrap()
            .re
        };
        // half maximum at |ω + ω_αβ| = 2γ_f
        assert!((at(2.0 * GF) / at(0.0) - 0.5).abs() < 1e-14);
        assert!((at(-2.0 * GF) / at(0.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn diagonal_singular_at_zero() {
        let r = spectral_response(
            AngularFrequency(0.0),
            SpinState::Zero,
            SpinState::Zero,
            AngularFrequency(0.0),
            AngularFrequency(GF),
        );
        assert!(matches!(r, Err(Error::Singular(_))));
        assert!(spectral_response(
            AngularFrequency(1.0),
            SpinState::Zero,
            SpinState::Plus,
            AngularFrequency(0.0),
            AngularFrequency(0.0)
        )
        .is_err());
    }

    #[test]
    fn zero_interaction_gives_zero_rates() {
        let r = effective_rates(&CMatrix9::zeros(), [0.0; 3], [0.0; 3], AngularFrequency(GF)).unwrap();
        assert_eq!(r.gamma, Matrix3::zeros());
        assert_eq!(r.delta, Matrix3::zeros());
    }

    #[test]
    fn secular_coupling_rates() {
        let rv = Vec3::new(1.0, 2.0, -4.0).normalize() * 5.0;
        let fs = make_frame(NvAxis::A.direction(), 0.2).unwrap();
        let ff = make_frame(NvAxis::A.direction(), 2.0).unwrap();
        let h = build_secular_hdd(&rv, &fs, &ff).unwrap();
        let rates = effective_rates(&h, [0.0; 3], [0.0; 3], AngularFrequency(GF)).unwrap();
        // no |+1> <-> |-1> transitions
        assert_eq!(rates.gamma[(0, 2)], 0.0);
        assert_eq!(rates.gamma[(2, 0)], 0.0);
        let c = crate::dipolar::coeffs_ghq(&fs, &ff, &rv.normalize()).unwrap();
        let golden = golden_rule_rate(Length(5.0), c.g, c.h, AngularFrequency(0.0), AngularFrequency(GF)).unwrap();
        // equivalent symbolic form (J²/r⁶)(g²+h²)(2/3)/(2γ_f)
        let j = J0 / 125.0;
        let symbolic = j * j * c.flip_flop_weight() * (2.0 / 3.0) / (2.0 * GF);
        assert!((golden.0 - symbolic).abs() < 1e-12 * symbolic);
        for (i, jx) in [(1, 2), (1, 0), (0, 1), (2, 1)] {
            assert!((rates.gamma[(i, jx)] - golden.0).abs() < 1e-12 * golden.0, "Γ[{i},{jx}]");
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut h = CMatrix9::zeros();
        let i = product_index(SpinState::Plus, SpinState::Zero);
        h[(i, 0)] = Complex64::new(1.0, 0.0);
        assert!(effective_rates(&h, [0.0; 3], [0.0; 3], AngularFrequency(GF)).is_err());
    }

    #[test]
    fn golden_rule_examples() {
        let gf = AngularFrequency(GF);
        let base = golden_rule_rate(Length(5.0), 1.0, 0.0, AngularFrequency(0.0), gf).unwrap();
        // (J₀/r³)²/(3γ_f) ≈ (2π)·17.5 kHz
        assert!((base.mhz() * 1e3 - 17.48).abs() < 0.01, "{}", base.mhz() * 1e3);
        let half = golden_rule_rate(Length(5.0), 1.0, 0.0, AngularFrequency(2.0 * GF), gf).unwrap();
        assert!((half.0 / base.0 - 0.5).abs() < 1e-14);
        let far = golden_rule_rate(Length(5.0), 1.0, 0.0, AngularFrequency(1e9), gf).unwrap();
        assert!(far.0 < 1e-12 * base.0);
        assert!(golden_rule_rate(Length(-1.0), 1.0, 0.0, AngularFrequency(0.0), gf).is_err());
        assert!(golden_rule_rate(Length(5.0), 1.0, 0.0, AngularFrequency(0.0), AngularFrequency(0.0)).is_err());
    }
}
