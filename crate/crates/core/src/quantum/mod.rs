//! Quantum Toda dynamics in a truncated harmonic-oscillator product basis.
//!
//! Both particles are expanded over unit-mass oscillator eigenstates of
//! frequency `omega`. Matrix elements of `exp(alpha q)` are analytic
//! (generalized Laguerre polynomials), the Hamiltonian is diagonalized
//! densely once, and states are propagated spectrally. Entanglement is the
//! von Neumann entropy of particle 1's reduced density matrix.

mod basis;
mod density;
mod elements;
mod entanglement;
mod hamiltonian;
mod spectral;
mod state;

pub use basis::BasisSpec;
pub use density::{reduced_density, von_neumann_entropy, ReducedDensity};
pub use elements::{ho_exp_matrix, ho_p2_matrix, ho_q2_matrix};
pub use entanglement::{entanglement_curve, entanglement_curves};
pub use hamiltonian::{build_hamiltonian, build_oscillator_hamiltonian};
pub use spectral::{spectral_decompose, SpectralDecomposition, ORTHOGONALITY_TOLERANCE, RECONSTRUCTION_TOLERANCE};
pub use state::{
    coherent_coefficients, coherent_deficit, evolve, packet_coefficients, packet_deficit, Propagator, WaveVector,
};

use thiserror::Error;

/// Largest admissible truncation deficit `1 - |c|^2` of an initial state.
pub const TRUNCATION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("basis configuration error: {0}")]
    Config(String),
    #[error("matrix element overflow: {0}")]
    Overflow(String),
    #[error(
        "initial state truncation deficit {deficit:.3e} exceeds {tolerance:.1e}; \
         a cutoff of at least {required_cutoff} is needed"
    )]
    Truncation {
        deficit: f64,
        tolerance: f64,
        required_cutoff: usize,
    },
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("spectral decomposition invariant violated: {0}")]
    Invariant(String),
    #[error("state and spectral decomposition use different bases")]
    BasisMismatch,
    #[error("density matrix eigenvalue {min_eigenvalue:.3e} is below -1e-6")]
    InvalidDensity { min_eigenvalue: f64 },
}

impl QuantumError {
    pub fn is_numerical_guard(&self) -> bool {
        !matches!(self, QuantumError::Config(_) | QuantumError::BasisMismatch)
    }
}
