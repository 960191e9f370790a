//! Error types shared across the solver.
//!
//! The CLI maps these onto process exit codes, so the split between
//! variants is part of the public contract: configuration/input problems
//! are distinct from solver non-convergence, which is distinct from a
//! structurally invalid equilibrium (e.g. several magnetic axes).

use thiserror::Error;

/// Anything that can go wrong while building geometry or running a solve.
#[derive(Debug, Error)]
pub enum GsError {
    /// Bad user input: files, config values, inconsistent dimensions.
    #[error("config error: {0}")]
    Config(String),

    /// Geometry construction failed (degenerate polygon, mesh too coarse,
    /// boundary touching the grid frame, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// An iteration (linear solver, Picard loop, Newton search) ran out of
    /// its budget without meeting its tolerance.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    /// The field does not describe a usable equilibrium (no axis, several
    /// extrema, ...). Distinct from `NonConvergence`: iterating further
    /// will not fix it.
    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    /// Internal consistency check failed. Always a bug, never user error.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GsError>;

impl GsError {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            GsError::Config(_) | GsError::Io(_) => 2,
            GsError::NonConvergence(_) => 3,
            GsError::InvalidSolution(_) => 4,
            GsError::Geometry(_) | GsError::Internal(_) => 1,
        }
    }
}
