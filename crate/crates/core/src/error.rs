use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical quantity that has to be strictly positive was not.
    #[error("{field} must be positive (got {value})")]
    NonPositive { field: &'static str, value: f64 },

    #[error("{field} must be finite (got {value})")]
    NonFinite { field: &'static str, value: f64 },

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// The state does not satisfy the operation's region precondition.
    #[error("precondition of {op} violated: {detail}")]
    Precondition { op: &'static str, detail: String },

    #[error("fixed-border return range is empty for the selected step time")]
    EmptyReturnRange,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trace has not converged: {0}")]
    NotConverged(String),

    #[error("inertia matrix is not positive definite at q = {0:?}")]
    SingularInertia([f64; 6]),

    #[error("trajectory planner failed after {iterations} iterations (constraint residual {residual:.3e})")]
    PlannerFailed { iterations: usize, residual: f64 },

    #[error("full-body rollout aborted at step {step}, t = {time:.4} s: {reason}")]
    RolloutAborted { step: usize, time: f64, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {detail}", path.display())]
    Parse { path: PathBuf, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn precondition(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Precondition {
            op,
            detail: detail.into(),
        }
    }
}
