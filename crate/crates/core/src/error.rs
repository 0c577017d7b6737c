use thiserror::Error;

/// Errors produced by grid construction, basis assembly, fitting and the
/// simulation harness.
#[derive(Debug, Error)]
pub enum FlError {
    /// A precondition on user input failed (bad dimensions, bad parameters,
    /// malformed grids).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The discretization points do not support unique polynomial
    /// interpolation of the requested order.
    #[error("grid not unisolvent for order {order}: {detail}")]
    Unisolvent { order: usize, detail: String },

    /// A linear system could not be factorized, even after regularization.
    #[error("linear solve failed: {0}")]
    Singular(String),

    /// The residual scale equation has no positive solution.
    #[error("degenerate residuals: {0}")]
    DegenerateScale(String),

    /// A NaN or infinity showed up where a finite value was required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An aggregate operation failed (e.g. every candidate in a search).
    #[error("{0}")]
    Failed(String),
}

impl FlError {
    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(self, FlError::Invalid(_) | FlError::Unisolvent { .. })
    }
}

pub type Result<T> = std::result::Result<T, FlError>;
