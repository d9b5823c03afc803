//! Crate-wide error type. Numerical failure modes (SVD non-convergence,
//! degenerate inputs) are explicit variants; nothing is silently zeroed.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    SvdFailure { rows: usize, cols: usize },

    #[error("operation undefined for the zero matrix: {0}")]
    ZeroMatrix(&'static str),

    #[error("rejection sampling gave up after {attempts} draws: {context}")]
    RejectionExhausted { attempts: usize, context: String },

    #[error("packing generation failed after {attempts} attempts (best attempt kept {best_kept} of {wanted} matrices)")]
    PackingExhausted {
        attempts: usize,
        best_kept: usize,
        wanted: usize,
        /// Property report of the best attempt's kept subset.
        report: Box<crate::packing::PackingReport>,
    },

    #[error("solver failed: {0}")]
    Solver(String),
}
