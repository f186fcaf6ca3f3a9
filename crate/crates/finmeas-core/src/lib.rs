//! Numerical laboratory for a finite-resource measurement model.
//!
//! A two-level system is coupled to an apparatus of `N` spins through
//! Hamiltonians drawn from the Gaussian Unitary Ensemble, block-supported on
//! magnetization sectors. The crate provides the random-matrix primitives
//! ([`rmt`]), the sector geometry and joint states ([`model`]), exact spectral
//! dynamics ([`dynamics`]), closed-form ensemble averages ([`analytics`]), and
//! seeded, replayable ensemble experiments ([`experiments`]).

extern crate blas_src;

pub mod analytics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod par;
pub mod rmt;
pub mod rng;

pub use error::{Error, Result};
