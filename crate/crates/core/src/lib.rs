//! Simulation and parameter estimation for the depolarization of dense
//! dipolar spin ensembles containing fast-relaxing fluctuator spins.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bath;
pub mod charge;
pub mod cli;
pub mod dipolar;
pub mod error;
pub mod fit;
pub mod io;
pub mod kinetics;
pub mod numerics;
pub mod oracle;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
