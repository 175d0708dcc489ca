use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    Validation(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("design matrix is singular or rank deficient")]
    SingularDesign,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("risk ratio undefined: reference risk is zero")]
    UndefinedRatio,
    #[error("treatment group {0} is empty")]
    EmptyGroup(usize),
    #[error("no outcome events in data")]
    NoEvents,
    #[error("outcome is constant ({0}); probit model is degenerate")]
    DegenerateOutcome(u8),
    #[error("too few units for boosting: {0} < 50")]
    TooFewUnits(usize),
    #[error("propensity column {0} is constant; use a univariate basis")]
    DegenerateGpsColumn(usize),
    #[error("calibration did not converge: {0}")]
    Calibration(String),
    #[error("{0}")]
    Failed(String),
}

/// Non-fatal conditions recorded on fitted models.
#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    /// Iteration limit reached before the convergence criterion was met.
    NotConverged { iterations: usize },
    /// Step halving could not find a step that decreases the objective.
    StepHalvingFailed { iteration: usize },
    /// Fitted probabilities are numerically 0 or 1 (separation).
    Separation,
    /// Penalized fit fell back to a ridge floor on all coefficients.
    RidgeFallback { lambda: f64 },
}

impl core::fmt::Display for FitWarning {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FitWarning::NotConverged { iterations } => {
                write!(f, "did not converge within {iterations} iterations")
            }
            FitWarning::StepHalvingFailed { iteration } => {
                write!(f, "step halving failed at iteration {iteration}")
            }
            FitWarning::Separation => f.write_str("fitted probabilities numerically 0 or 1"),
            FitWarning::RidgeFallback { lambda } => {
                write!(f, "separation detected; refit with ridge floor {lambda}")
            }
        }
    }
}
