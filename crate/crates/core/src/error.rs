use thiserror::Error;

use crate::shooting::AstarResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("step limit of {steps} exceeded at t = {t}")]
    StepLimitExceeded { t: f64, steps: usize },

    /// Step size fell below the underflow threshold; the problem is either
    /// stiff or singular on the requested range.
    #[error("step size {h:e} underflowed at t = {t}; stiffness suspected")]
    StiffnessSuspected { t: f64, h: f64 },

    #[error("no lower bracket endpoint found above {floor:e}")]
    SeedFailure { floor: f64 },

    /// Bisection could not disambiguate a midpoint even at the horizon cap.
    /// The partial result carries the bracket reached so far.
    #[error("x_max cap exceeded while resolving a = {a}")]
    XMaxCapExceeded { a: f64, partial: Box<AstarResult> },

    #[error("check `{check}` failed: {detail}")]
    CheckFailed {
        check: String,
        detail: String,
        /// Offending node as (coordinate, value, derivative), if any.
        node: Option<(f64, f64, f64)>,
    },

    #[error("a = {0} does not cross 1 (not in S+)")]
    NotInSPlus(f64),

    #[error("probe r = {0} lies outside the integrated range")]
    ProbeOutOfRange(f64),

    #[error("fit window holds {found} usable nodes, need {needed}")]
    WindowTooShort { found: usize, needed: usize },
}

impl Error {
    /// True for failures raised by the integrator itself.
    pub fn is_integration_failure(&self) -> bool {
        matches!(
            self,
            Error::StepLimitExceeded { .. } | Error::StiffnessSuspected { .. }
        )
    }
}
