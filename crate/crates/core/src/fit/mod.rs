//! Nonlinear least squares and the model-specific fitters.

mod lm;
mod models;
mod series;

pub use lm::{fit_curve, least_squares, numerical_jacobian, Bounds, FitOptions, FitResult};
pub use models::{fit_lorentzian, fit_rate_pair, fit_resonance, fit_stretched, lorentzian, Amplitude, ResonanceFit, ResonanceFitOptions};
pub use series::CurveSeries;
