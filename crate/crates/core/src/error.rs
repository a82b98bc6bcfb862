//! Error types shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A solver constructor precondition failed. The message names the
    /// violated condition with the offending numbers.
    #[error("solver precondition violated: {0}")]
    Precondition(String),

    /// An iterative estimate failed to stagnate within its budget.
    /// Carries the last estimate so callers can still inspect it.
    #[error("no convergence after {iterations} iterations (last estimate {last_estimate})")]
    NoConvergence { iterations: usize, last_estimate: f64 },

    /// A per-step structural check failed mid-run (singular sampled block,
    /// non-positive Hessian, step bound on a sampled block).
    #[error("step {iteration} failed: {message}")]
    StepFailed { iteration: usize, message: String },

    /// Missing data required by a certificate or estimator.
    #[error("{0}")]
    Missing(String),

    /// Invalid argument outside the solver-precondition category.
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
