//! Entanglement dynamics of two interacting Toda particles.
//!
//! The crate pairs two computations of the same quantity:
//!
//! * [`quantum`]: the von Neumann entropy of one particle's reduced density
//!   matrix, for a separable coherent state evolved under the quantized Toda
//!   Hamiltonian in a truncated harmonic-oscillator product basis.
//! * [`ensemble`]: the Shannon entropy of a classical Gaussian ensemble,
//!   evolved with RK4 and coarse-grained on square cells of area `delta` in
//!   one particle's `(q, p)` plane.
//!
//! [`dynamics`] holds the classical model (energies, Hamilton's equations,
//! trajectories, surfaces of section) and [`analysis`] extracts growth laws,
//! saturation values and saturation times from the resulting curves.
//!
//! Data-parallel loops (ensemble points, trajectories, matrix rows) run on
//! rayon when the `parallel` feature is enabled and fall back to plain
//! iteration otherwise; see [`exec::Execution`]. Results never depend on
//! which path ran.

pub mod analysis;
pub mod curve;
pub mod dynamics;
pub mod ensemble;
pub mod exec;
pub mod quantum;

pub use curve::{CurveError, CurveTag, EntropyCurve, Particle};
pub use dynamics::{ModelParams, PacketWidth, PhaseState, Preset};
pub use exec::Execution;

use thiserror::Error;

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error(transparent)]
    Quantum(#[from] quantum::QuantumError),
    #[error(transparent)]
    Ensemble(#[from] ensemble::EnsembleError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

impl Error {
    /// True for failures of a numerical guard (energy drift, overflow,
    /// truncation deficit, corrupt density matrix) as opposed to bad input.
    pub fn is_numerical_guard(&self) -> bool {
        match self {
            Error::Dynamics(e) => e.is_numerical_guard(),
            Error::Quantum(e) => e.is_numerical_guard(),
            Error::Ensemble(e) => e.is_numerical_guard(),
            Error::Analysis(_) => true,
            Error::Curve(_) => false,
        }
    }
}

/// Version string recorded in every emitted artifact header.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
