//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the numerical and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the validated numerical range of a routine.
    #[error("argument out of validated range: {0}")]
    Range(String),

    /// Invalid parameter (domain precondition violated).
    #[error("invalid parameter: {0}")]
    Domain(String),

    /// A quadrature or series failed its self-convergence check.
    #[error("accuracy failure: {0}")]
    Accuracy(String),

    /// A series showed no sign of convergence (term ratio >= 1).
    #[error("series divergence: {0}")]
    Divergence(String),

    /// Empty input where at least one sample is required.
    #[error("empty sample set")]
    EmptySamples,

    /// Simulation error in a specific replica.
    #[error("run {run}: {source}")]
    Run {
        run: u64,
        #[source]
        source: Box<Error>,
    },

    /// IO error (CSV reading/writing in the analysis layer).
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
