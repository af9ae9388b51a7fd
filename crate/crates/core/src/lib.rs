//! Exact solutions of the one-dimensional Schrödinger equation with a
//! time-dependent linear potential, built from Lewis-Riesenfeld invariants and
//! checked against an independent split-step propagator.
//!
//! Units: ħ = 1, `[q, p] = i`.

pub mod app;
pub mod error;
pub mod grid;
pub mod invariants;
pub mod oracle;
pub mod quad;
pub mod report;
pub mod scenario;
pub mod solutions;
pub mod transforms;
pub mod weyl;

pub use error::{Error, Result};
