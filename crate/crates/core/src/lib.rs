//! Adaptive interferometric phase estimation.
//!
//! An N-photon permutation-symmetric probe state is sent photon by photon
//! through a two-arm interferometer with an unknown phase `φ` and a
//! controllable feedback phase `Φ`. A controller chooses the next `Φ` from
//! the detection record. This crate provides the simulator, two controller
//! families (a trained Markov update rule and a Bayesian filter), a Monte
//! Carlo engine, a policy trainer and a power-law regression toolkit for
//! reading scaling exponents off variance-versus-N curves.

pub mod cli;
pub mod engine;
pub mod error;
pub mod noise;
pub mod optim;
pub mod oracle;
pub mod phase;
pub mod policies;
pub mod regress;
pub mod rng;
pub mod state;
pub mod trainer;
pub mod wigner;

pub use error::{Error, Result};
pub use phase::PhaseAngle;

/// Largest photon number for which double-precision state evolution is
/// supported.
pub const MAX_PHOTONS: usize = 100;
