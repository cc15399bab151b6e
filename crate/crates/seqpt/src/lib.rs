//! Selective efficient quantum process tomography.
//!
//! Estimates individual elements of a quantum channel's χ-matrix by Monte
//! Carlo sampling over the state 2-design formed by a complete set of
//! mutually unbiased bases. A dense density-matrix simulator plays the role
//! of the experimental device, and exact brute-force oracles back every
//! estimator.

pub mod channel;
pub mod circuit;
pub mod error;
pub mod estimator;
pub mod gf2;
pub mod mub;
pub mod pauli;

pub use error::{Error, Result};

/// Tool version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
