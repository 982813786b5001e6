//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A scenario description is structurally invalid (bad partition,
    /// non-finite positions, inconsistent antenna counts, ...).
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("{what}: residual {residual:.3e} after {iterations} iterations")]
    SolverFailure {
        what: String,
        residual: f64,
        iterations: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
