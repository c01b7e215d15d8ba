use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coordinate {value} at position {index} lies outside [0, 1]")]
    CoordinateOutOfRange { index: usize, value: f64 },

    #[error("malformed literal `{literal}`: {reason}")]
    Parse { literal: String, reason: String },

    #[error("breakpoint budget exceeded: {required} breakpoints required, budget is {budget}")]
    BreakpointBudget { required: usize, budget: usize },

    #[error("dimension {dim} exceeds the inclusion-exclusion limit of {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("frequency generator exhausted: needed a frequency above {needed}, budget is {budget} terms")]
    FrequencyBudget { needed: f64, budget: usize },

    #[error("scan resolution {resolution} is coarser than the admissible {max}")]
    ResolutionTooCoarse { resolution: f64, max: f64 },

    #[error("ball {inner} is contained in ball {outer}")]
    Containment { inner: usize, outer: usize },
}

impl Error {
    /// Errors that signal an exhausted computational budget rather than a
    /// violated precondition.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::BreakpointBudget { .. } | Error::FrequencyBudget { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
