use std::fmt;

use thiserror::Error;

/// Why an integration stopped before reaching the end of its interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationFailure {
    /// The step size collapsed below the representable resolution of `t`.
    StepUnderflow,
    /// The configured step budget was exhausted.
    MaxSteps,
    /// The vector field kept failing (e.g. a collision) and the step could
    /// not be shrunk further.
    FieldFailure,
}

impl fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StepUnderflow => f.write_str("step size underflow"),
            Self::MaxSteps => f.write_str("maximum number of steps exceeded"),
            Self::FieldFailure => f.write_str("vector field evaluation failed"),
        }
    }
}

/// Integration failure carrying the last accepted point of the trajectory.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("integration stopped at t = {t}: {reason}{}", detail.as_ref().map(|d| format!(" ({d})")).unwrap_or_default())]
pub struct IntegrationError {
    pub reason: IntegrationFailure,
    /// Time of the last accepted step.
    pub t: f64,
    /// State at `t`.
    pub state: Vec<f64>,
    /// Message of the last field error, if any.
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    /// Evaluation too close to a collision of two vortices (or its shadow in
    /// reduced coordinates).
    #[error("singularity: {0}")]
    Singularity(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A matrix expected to be a rank-one outer product is not.
    #[error("matrix is not rank one: second eigenvalue is {ratio:e} of the largest")]
    Rank { ratio: f64 },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("t = {t} is outside the trajectory range [{start}, {end}]")]
    Range { t: f64, start: f64, end: f64 },

    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
