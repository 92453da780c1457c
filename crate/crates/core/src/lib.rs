//! Simulation core for a three-step controlled-phase gate between two
//! four-level superconducting flux qubits that share a single cavity mode.
//!
//! The crate is `no_std` and only needs `alloc`. All dynamics are written in
//! the interaction picture with `ħ = 1`; every frequency and rate is an
//! angular frequency in rad/s and every duration is in seconds.
//!
//! * [`statespace`] lays out `qubit 1 ⊗ qubit 2 ⊗ cavity` and builds
//!   elementary operators.
//! * [`dynamics`] builds Hamiltonians and collapse operators and propagates
//!   pure states (exact, by eigendecomposition) and density matrices
//!   (fixed-step RK4 on the Lindblad equation).
//! * [`protocol`] encodes the nine-segment pulse/wait schedule and runs it.
//! * [`analysis`] extracts the computational-subspace gate, fidelities,
//!   leakage, timing budgets and parameter sweeps.
//! * [`oracle`] is an independent fine-step propagator (Taylor series with
//!   scaling and squaring) used to cross-check the main path and to
//!   generate frozen regression values.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod oracle;
pub mod protocol;
pub mod statespace;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};

/// Conversion factor from ordinary frequency (Hz) to angular frequency (rad/s).
pub const TWO_PI: f64 = 2.0 * core::f64::consts::PI;
