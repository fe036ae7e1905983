//! Desk-scale laboratory for a 1D periodic compressible flow model with
//! density-dependent viscosity, capillarity, and a linear drag force.
//!
//! The crate has three layers:
//!
//! * numerics: [`fields`] (periodic grid and stencils), [`constitutive`]
//!   (viscosity/pressure families and admissibility), [`entropy`] (the
//!   modulated energy and its dissipation channels);
//! * experiments: [`solver`] (structure-preserving time integration with an
//!   entropy-budget step guard and exponential-decay fitting);
//! * verification: [`verifier`] (inequality checks as bounded ratios over
//!   seeded profile ensembles), with [`config`] and [`cli`] as the batch
//!   front door used by the `nsk` binary.

pub mod cli;
pub mod config;
pub mod constitutive;
pub mod entropy;
pub mod error;
pub mod fields;
pub mod solver;
pub mod verifier;

pub use error::{Error, Result};
