//! Adaptive Dormand–Prince integration of the two-body Lindblad equation.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CMatrix3, CMatrix9, SpinState};
use crate::error::{Error, Result};
use crate::units::{AngularFrequency, Time};

/// Normalized 9×9 Hermitian density matrix of spin ⊗ fluctuator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix9(CMatrix9);

impl DensityMatrix9 {
    /// Validates Hermiticity and unit trace (1e-10) and positivity (−1e-8).
    pub fn new(m: CMatrix9) -> Result<Self> {
        let herm = (m - m.adjoint()).norm();
        if herm > 1e-10 {
            return Err(Error::domain(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        let tr = m.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::domain(format!("density matrix trace is {tr}, expected 1")));
        }
        let rho = DensityMatrix9(m);
        let min = rho.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::domain(format!("density matrix has negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    /// ρ_spin ⊗ ρ_fluctuator.
    pub fn product(spin: &CMatrix3, fluctuator: &CMatrix3) -> Result<Self> {
        Self::new(spin.kronecker(fluctuator))
    }

    /// Spin in a basis state, fluctuator maximally mixed.
    pub fn spin_state_with_mixed_fluctuator(spin: SpinState) -> Self {
        let mut s = CMatrix3::zeros();
        s[(spin.index(), spin.index())] = Complex64::new(1.0, 0.0);
        let f = CMatrix3::identity() / Complex64::new(3.0, 0.0);
        DensityMatrix9(s.kronecker(&f))
    }

    pub fn matrix(&self) -> &CMatrix9 {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix9 {
        self.0
    }

    /// Partial trace over the fluctuator.
    pub fn spin_reduced(&self) -> CMatrix3 {
        let mut out = CMatrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out[(i, j)] = (0..3).map(|a| self.0[(3 * i + a, 3 * j + a)]).sum();
            }
        }
        out
    }

    /// Partial trace over the probe spin.
    pub fn fluctuator_reduced(&self) -> CMatrix3 {
        let mut out = CMatrix3::zeros();
        for a in 0..3 {
            for b in 0..3 {
                out[(a, b)] = (0..3).map(|i| self.0[(3 * i + a, 3 * i + b)]).sum();
            }
        }
        out
    }

    /// Spin populations in (+1, 0, −1) order.
    pub fn spin_populations(&self) -> [f64; 3] {
        let r = self.spin_reduced();
        [r[(0, 0)].re, r[(1, 1)].re, r[(2, 2)].re]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }
}

fn min_eigenvalue(m: &CMatrix9) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(herm).eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Incoherent fluctuator jump `|to⟩⟨from|` at `rate`, acting as
/// `L = √rate · I_spin ⊗ |to⟩⟨from|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayChannel {
    pub from: SpinState,
    pub to: SpinState,
    pub rate: AngularFrequency,
}

impl DecayChannel {
    pub fn new(from: SpinState, to: SpinState, rate: AngularFrequency) -> Result<Self> {
        if from == to {
            return Err(Error::domain("decay channel must connect distinct states"));
        }
        if !(rate.0 >= 0.0) {
            return Err(Error::domain(format!("decay rate must be >= 0, got {rate}")));
        }
        Ok(DecayChannel { from, to, rate })
    }

    /// The six equal-rate channels ±1↔0 and +1↔−1.
    pub fn full_set(gamma_f: AngularFrequency) -> Vec<DecayChannel> {
        let mut out = Vec::with_capacity(6);
        for from in SpinState::ALL {
            for to in SpinState::ALL {
                if from != to {
                    out.push(DecayChannel { from, to, rate: gamma_f });
                }
            }
        }
        out
    }
}

/// Step-size control settings.
#[derive(Clone, Copy, Debug)]
pub struct PropagatorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Check the spectrum of ρ every this many accepted steps (0 disables).
    pub eigen_check_stride: usize,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        PropagatorOptions {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_steps: 20_000_000,
            eigen_check_stride: 1,
        }
    }
}

/// Invariant monitoring over all accepted steps.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PropagationDiagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug)]
pub struct Propagation {
    pub state: DensityMatrix9,
    pub diagnostics: PropagationDiagnostics,
}

// sparse jump operator entries (row, col, amplitude)
type Jump = [(usize, usize, f64); 3];

/// Integrates ρ̇ = −i[H,ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ}).
pub struct LindbladPropagator {
    h_eff: CMatrix9,
    jumps: Vec<Jump>,
    rho: CMatrix9,
    t: f64,
    dt: f64,
    k_first: Option<CMatrix9>,
    opts: PropagatorOptions,
    diag: PropagationDiagnostics,
}

// autonomous system, so the node vector c is not needed
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl LindbladPropagator {
    pub fn new(rho0: &DensityMatrix9, h: &CMatrix9, channels: &[DecayChannel], opts: PropagatorOptions) -> Result<Self> {
        if (h - h.adjoint()).norm() > 1e-10 * h.norm().max(1.0) {
            return Err(Error::domain("Hamiltonian is not Hermitian"));
        }
        let mut h_eff = *h;
        let mut jumps = Vec::with_capacity(channels.len());
        for ch in channels {
            if ch.from == ch.to || !(ch.rate.0 >= 0.0) {
                return Err(Error::domain(format!("invalid decay channel {ch:?}")));
            }
            let amp = ch.rate.0.sqrt();
            let mut jump = [(0, 0, 0.0); 3];
            for s in 0..3 {
                let row = 3 * s + ch.to.index();
                let col = 3 * s + ch.from.index();
                jump[s] = (row, col, amp);
                // L†L = rate·|from⟩⟨from| on the fluctuator
                h_eff[(col, col)] -= Complex64::new(0.0, 0.5 * ch.rate.0);
            }
            jumps.push(jump);
        }
        let rate_scale = h.norm() + channels.iter().map(|c| c.rate.0).sum::<f64>();
        let dt = if rate_scale > 0.0 { 0.01 / rate_scale } else { 1.0 };
        Ok(LindbladPropagator {
            h_eff,
            jumps,
            rho: *rho0.matrix(),
            t: 0.0,
            dt,
            k_first: None,
            opts,
            diag: PropagationDiagnostics {
                min_eigenvalue: rho0.min_eigenvalue(),
                ..Default::default()
            },
        })
    }

    pub fn time(&self) -> Time {
        Time(self.t)
    }

    pub fn matrix(&self) -> &CMatrix9 {
        &self.rho
    }

    pub fn diagnostics(&self) -> PropagationDiagnostics {
        self.diag
    }

    pub fn state(&self) -> Result<DensityMatrix9> {
        DensityMatrix9::new(self.rho)
    }

    fn rhs(&self, rho: &CMatrix9) -> CMatrix9 {
        let mi = Complex64::new(0.0, -1.0);
        let a = self.h_eff * rho;
        // −i(H_eff ρ − ρ H_eff†) = −i H_eff ρ + h.c.
        let mut out = a * mi;
        out += out.adjoint();
        for jump in &self.jumps {
            for &(ri, ci, ai) in jump {
                for &(rj, cj, aj) in jump {
                    out[(ri, rj)] += rho[(ci, cj)] * (ai * aj);
                }
            }
        }
        out
    }

    /// Advances the state to absolute time `t_end` (≥ current time).
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        if t_end < self.t {
            return Err(Error::domain(format!("cannot propagate backwards from {} to {t_end}", self.t)));
        }
        let opts = self.opts;
        while self.t < t_end {
            if self.diag.accepted_steps + self.diag.rejected_steps >= opts.max_steps {
                return Err(self.failure("step budget exhausted"));
            }
            let remaining = t_end - self.t;
            let last = self.dt >= remaining;
            let h = if last { remaining } else { self.dt };
            let mut k: [CMatrix9; 7] = [CMatrix9::zeros(); 7];
            k[0] = match self.k_first {
                Some(k0) => k0,
                None => self.rhs(&self.rho),
            };
            for s in 1..7 {
                let mut y = self.rho;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        y += kj * Complex64::new(h * a, 0.0);
                    }
                }
                k[s] = self.rhs(&y);
            }
            // FSAL: the last stage was evaluated at the fifth-order solution
            let mut y_new = self.rho;
            for (s, ks) in k.iter().enumerate().take(6) {
                if A[6][s] != 0.0 {
                    y_new += ks * Complex64::new(h * A[6][s], 0.0);
                }
            }
            let mut err = CMatrix9::zeros();
            for s in 0..7 {
                if E[s] != 0.0 {
                    err += k[s] * Complex64::new(h * E[s], 0.0);
                }
            }
            let mut norm = 0.0f64;
            for (i, e) in err.iter().enumerate() {
                let scale = opts.abs_tol + opts.rel_tol * self.rho[i].norm().max(y_new[i].norm());
                norm = norm.max(e.re.abs().max(e.im.abs()) / scale);
            }
            if !norm.is_finite() {
                return Err(self.failure("non-finite error estimate"));
            }
            if norm <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.rho = y_new;
                self.k_first = Some(k[6]);
                self.diag.accepted_steps += 1;
                self.monitor();
                let factor = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last || factor < 1.0 {
                    self.dt = h * factor;
                }
            } else {
                self.diag.rejected_steps += 1;
                self.dt = h * (0.9 * norm.powf(-0.2)).clamp(0.2, 1.0);
                if self.dt < 1e-14 * self.t.max(1.0) {
                    return Err(self.failure("step size underflow"));
                }
            }
        }
        Ok(())
    }

    fn monitor(&mut self) {
        let tr = (self.rho.trace() - Complex64::new(1.0, 0.0)).norm();
        let herm = (self.rho - self.rho.adjoint()).norm();
        self.diag.max_trace_error = self.diag.max_trace_error.max(tr);
        self.diag.max_hermiticity_error = self.diag.max_hermiticity_error.max(herm);
        let stride = self.opts.eigen_check_stride;
        if stride > 0 && self.diag.accepted_steps.is_multiple_of(stride) {
            self.diag.min_eigenvalue = self.diag.min_eigenvalue.min(min_eigenvalue(&self.rho));
        }
    }

    fn failure(&self, what: &str) -> Error {
        Error::Numerical {
            message: format!("Lindblad integration failed: {what}"),
            diagnostics: format!("t = {} us, dt = {:e}, {:?}", self.t, self.dt, self.diag),
        }
    }
}

/// Propagates `rho0` for a time `t` with default tolerances
/// (relative 1e-8, absolute 1e-10).
pub fn propagate_lindblad(rho0: &DensityMatrix9, h: &CMatrix9, channels: &[DecayChannel], t: Time) -> Result<Propagation> {
    propagate_lindblad_with(rho0, h, channels, t, PropagatorOptions::default())
}

pub fn propagate_lindblad_with(
    rho0: &DensityMatrix9,
    h: &CMatrix9,
    channels: &[DecayChannel],
    t: Time,
    opts: PropagatorOptions,
) -> Result<Propagation> {
    if !(t.0 >= 0.0) {
        return Err(Error::domain(format!("propagation time must be >= 0, got {t}")));
    }
    let mut p = LindbladPropagator::new(rho0, h, channels, opts)?;
    p.advance_to(t.0)?;
    let mut diagnostics = p.diagnostics();
    diagnostics.min_eigenvalue = diagnostics.min_eigenvalue.min(min_eigenvalue(p.matrix()));
    Ok(Propagation {
        state: p.state()?,
        diagnostics,
    })
}
