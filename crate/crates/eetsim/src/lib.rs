//! Simulation toolkit for photosynthetic exciton energy transfer mapped onto
//! a small qubit register.
//!
//! The crate covers one pipeline, end to end:
//!
//! * [`model`] builds Frenkel-exciton Hamiltonians in wavenumber units,
//!   rescales them onto NMR-accessible angular frequencies, and decomposes
//!   them into Pauli strings for a two-qubit register.
//! * [`spectral`] holds bath spectral densities, the Debye lineshape
//!   function `g(t)`, and discrete-comb noise profiles whose phase variance
//!   `chi(t)` reproduces the lineshape dephasing.
//! * [`heom`] is an exact hierarchical-equations-of-motion solver for the
//!   high-temperature Debye bath (one exponential per site).
//! * [`trajectory`] propagates piecewise-constant Hamiltonian schedules
//!   driven by engineered classical noise and averages seeded ensembles.
//! * [`ramsey`] produces Ramsey fringes both analytically and from noise
//!   ensembles, and extracts decay envelopes from fringe data.
//! * [`grape`] optimizes piecewise-constant control pulses against a target
//!   unitary with exact and first-order gradients.
//!
//! All angular frequencies are `rad/ms`, all times are `ms`, and all
//! temperatures entering numerical formulas have been folded into
//! `T' = k_B T / hbar` in `rad/ms` unless a function explicitly asks for
//! kelvin. Determinism is part of the contract: every stochastic routine
//! takes an explicit seed, and results are identical across thread counts
//! and across the `parallel`/sequential execution modes.

pub mod exec;
pub mod grape;
pub mod heom;
pub mod io;
pub mod model;
pub mod ramsey;
pub mod spectral;
pub mod tol;
pub mod trajectory;

mod mat;

pub use exec::RunMode;

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by what the caller can do about them: fix the
/// input, lift a resource budget, or treat the computation as failed.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (dimensions, ranges,
    /// normalization, grid alignment).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A requested combination of options has no defined meaning here.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The computation ran but failed a numerical validity check
    /// (lost Hermiticity, non-finite values, ill-conditioned point).
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A configured resource budget would be exceeded; the message carries
    /// the computed requirement so the caller can decide.
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    /// File input could not be read or written.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// File content could not be parsed in one of the crate's formats.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
