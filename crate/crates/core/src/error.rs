//! Error type shared by every module, plus the mapping to process exit codes.

use thiserror::Error;

/// Everything that can go wrong while building distributions, solving games or
/// auditing profiles.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed user input (distribution spec, partition, price list, tolerances).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A caller-side precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The requested cutoff is above the prior mean, so no threshold is needed.
    #[error("no worst-case threshold for cutoff {cutoff}: it exceeds the prior mean {mean}")]
    NoThreshold { cutoff: f64, mean: f64 },

    /// The numerically evaluated conditional-mean map decreased on an interval.
    #[error("conditional-mean map is not monotone on [{lo}, {hi}]")]
    NonMonotone { lo: f64, hi: f64 },

    /// Partition cells are empty, overlapping or do not cover the support.
    #[error("invalid partition: {0}")]
    Partition(String),

    /// The target conditional mean cannot be reached inside the support.
    #[error("unreachable cutoff {0}: conditional means above any threshold stay below it")]
    UnreachableCutoff(f64),

    /// An iterative procedure hit its cap without meeting its tolerance.
    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    Nonconvergence { iterations: usize, last_change: f64 },

    /// Two independently computed quantities disagree beyond tolerance.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    /// A strategy profile was asked about a state it does not cover.
    #[error("profile incomplete: {0}")]
    ProfileIncomplete(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 3 for numerical nonconvergence, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Nonconvergence { .. } => 3,
            _ => 2,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("discount factor must lie in (0,1), got {delta}")))
    }
}
