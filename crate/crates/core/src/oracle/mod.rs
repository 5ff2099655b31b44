//! Two-body quantum oracle: one probe spin-1 and one fluctuator spin-1.
//!
//! Both particles use the basis ordering (+1, 0, −1); the product basis index
//! of `|m_s, m_f⟩` is `3·i(m_s) + i(m_f)`.

mod decay;
mod hamiltonian;
mod lindblad;
mod spectral;

pub use decay::{oracle_decay_rate, OracleRate, OracleSetup};
pub use hamiltonian::{build_secular_hdd, build_secular_hdd_with_coupling, local_hamiltonian, product_index};
pub use lindblad::{
    propagate_lindblad, propagate_lindblad_with, DecayChannel, DensityMatrix9, LindbladPropagator, Propagation, PropagationDiagnostics,
    PropagatorOptions,
};
pub use spectral::{effective_rates, golden_rule_rate, golden_rule_rate_raw, spectral_integral, spectral_response, EffectiveRates};

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

pub type CMatrix9 = SMatrix<Complex64, 9, 9>;
pub type CMatrix3 = SMatrix<Complex64, 3, 3>;
pub type CVector9 = SVector<Complex64, 9>;

/// Spin-1 projection, ordered (+1, 0, −1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SpinState {
    Plus,
    Zero,
    Minus,
}

impl SpinState {
    pub const ALL: [SpinState; 3] = [SpinState::Plus, SpinState::Zero, SpinState::Minus];

    pub fn index(self) -> usize {
        match self {
            SpinState::Plus => 0,
            SpinState::Zero => 1,
            SpinState::Minus => 2,
        }
    }

    pub fn m(self) -> f64 {
        match self {
            SpinState::Plus => 1.0,
            SpinState::Zero => 0.0,
            SpinState::Minus => -1.0,
        }
    }
}
