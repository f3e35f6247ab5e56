use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation (e.g. `n < 5`).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric parameter violates an operation precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An operation was called in a regime where it does not apply.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A root search could not find a sign change.
    #[error("no sign change bracketed on [{lo}, {hi}]: {detail}")]
    Bracket { lo: f64, hi: f64, detail: String },

    /// The step size collapsed below the relative floor.
    #[error("step size underflow at t = {t:e} (h = {h:e}); problem is stiff or singular here")]
    StepUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    MaxSteps(usize),

    /// A computed quantity violates an identity that must hold analytically.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    /// A shot did not produce the classification required by the caller.
    #[error("classification error: {0}")]
    Classification(String),

    /// A diagnostic cannot be evaluated on the given data.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("estimator failure: {0}")]
    Estimator(String),
}

impl Error {
    /// True for errors caused by invalid input rather than numerical trouble.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Parameter(_) | Error::Precondition(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
