use thiserror::Error;

/// Errors raised by the tuning, simulation and Lambert W routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid Lambert W branch index {0}; only 0 and -1 are supported")]
    InvalidBranch(i32),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("closed loop diverged: |y| = {value:e} at t = {time}")]
    Unstable { time: f64, value: f64 },

    #[error("response has not reached steady state: |y(end) - 1| = {deviation:e}")]
    NotSettled { deviation: f64 },

    #[error(
        "target overshoot {target}% is unreachable (maximum {max:.3}% at gamma = {gamma_max})"
    )]
    UnreachableTarget {
        target: f64,
        max: f64,
        gamma_max: f64,
    },
}

impl Error {
    /// Short machine-readable tag, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidBranch(_) => "invalid_branch",
            Error::Domain(_) => "domain",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Unstable { .. } => "unstable",
            Error::NotSettled { .. } => "not_settled",
            Error::UnreachableTarget { .. } => "unreachable_target",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
