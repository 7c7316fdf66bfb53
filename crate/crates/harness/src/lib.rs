//! Experiment orchestration for the Toda entanglement study: configuration,
//! the on-disk spectral cache, sweep execution and the text artifacts
//! (curve tables, surface-of-section points, analysis report, manifest).
//!
//! All file I/O of the workspace lives here; `toda-core` stays pure.

pub mod cache;
pub mod config;
pub mod experiment;
pub mod report;
pub mod tables;

use std::path::PathBuf;

use thiserror::Error;

pub use cache::{CacheOutcome, SpectralCache, CACHE_DIR_ENV};
pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, RunSummary, Stages};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] toda_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("truncation check failed at hbar = {hbar}: curves for cutoffs {cutoff} and {wider} differ by {difference:.3e} (limit {tolerance:.1e})")]
    Convergence {
        hbar: f64,
        cutoff: usize,
        wider: usize,
        difference: f64,
        tolerance: f64,
    },
    #[error("{failed} of {total} sweep cells failed")]
    Partial { failed: usize, total: usize, guard_only: bool },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_numerical_guard(&self) -> bool {
        match self {
            HarnessError::Model(e) => e.is_numerical_guard(),
            HarnessError::Convergence { .. } => true,
            _ => false,
        }
    }

    /// Process exit status: 1 for configuration and I/O problems, 2 for a
    /// numerical guard, 3 when only part of a sweep failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Partial {
                failed,
                total,
                guard_only,
            } => {
                if failed == total && *guard_only {
                    2
                } else {
                    3
                }
            }
            e if e.is_numerical_guard() => 2,
            _ => 1,
        }
    }
}

impl From<toda_core::quantum::QuantumError> for HarnessError {
    fn from(e: toda_core::quantum::QuantumError) -> Self {
        HarnessError::Model(e.into())
    }
}

/// Hex-encoded SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
