use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("singular matrix (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("entropy gradient undefined at boundary point: {0}")]
    BoundaryGradient(String),

    #[error("LP iteration cap of {0} pivots exceeded")]
    IterationCap(usize),

    #[error("Slater condition violated: the feasible set has no strictly feasible point")]
    SlaterViolation,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative method, as opposed to bad input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::Diverged(_) | Error::IterationCap(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
