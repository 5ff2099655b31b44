use num_complex::Complex64;

use super::{CMatrix9, SpinState};
use crate::dipolar::coeffs_unchecked;
use crate::error::{Error, Result};
use crate::units::{Frame, Vec3, J0};

pub fn product_index(spin: SpinState, fluctuator: SpinState) -> usize {
    3 * spin.index() + fluctuator.index()
}

/// Secular dipolar Hamiltonian
/// `−(J₀/r³)[(g+ih)(|+1,0⟩⟨0,+1| + |0,−1⟩⟨−1,0|) + h.c. + q S^z⊗S^z]`.
pub fn build_secular_hdd(r_vec: &Vec3, frame_s: &Frame, frame_f: &Frame) -> Result<CMatrix9> {
    build_secular_hdd_with_coupling(r_vec, frame_s, frame_f, J0)
}

/// As [`build_secular_hdd`] with an explicit coupling prefactor in rad·µs⁻¹·nm³.
pub fn build_secular_hdd_with_coupling(r_vec: &Vec3, frame_s: &Frame, frame_f: &Frame, coupling: f64) -> Result<CMatrix9> {
    let r = r_vec.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("spin-fluctuator separation must be positive, got {r}")));
    }
    let c = coeffs_unchecked(frame_s, frame_f, &(r_vec / r));
    let j = coupling / r.powi(3);
    let flip = Complex64::new(-j * c.g, -j * c.h);
    let mut h = CMatrix9::zeros();
    use SpinState::*;
    for (a, b) in [((Plus, Zero), (Zero, Plus)), ((Zero, Minus), (Minus, Zero))] {
        let row = product_index(a.0, a.1);
        let col = product_index(b.0, b.1);
        h[(row, col)] += flip;
        h[(col, row)] += flip.conj();
    }
    for s in SpinState::ALL {
        for f in SpinState::ALL {
            let i = product_index(s, f);
            h[(i, i)] += Complex64::new(-j * c.q * s.m() * f.m(), 0.0);
        }
    }
    Ok(h)
}

/// `H₁ ⊗ I + I ⊗ H₂` for diagonal single-particle energies (ordered +1, 0, −1).
pub fn local_hamiltonian(spin_energies: [f64; 3], fluctuator_energies: [f64; 3]) -> CMatrix9 {
    let mut h = CMatrix9::zeros();
    for i in 0..3 {
        for a in 0..3 {
            h[(3 * i + a, 3 * i + a)] = Complex64::new(spin_energies[i] + fluctuator_energies[a], 0.0);
        }
    }
    h
}
