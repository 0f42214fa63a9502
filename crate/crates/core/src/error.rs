use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("n-step transition requested with n = 0")]
    ZeroSteps,

    #[error("relative value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("stationary distribution solve failed: {0}")]
    SingularChain(String),

    #[error("policy enumeration too large: {n_actions}^{n_states} exceeds {limit}")]
    TooLarge {
        n_states: usize,
        n_actions: usize,
        limit: u64,
    },

    #[error("policy kind `{0}` needs a solved policy table")]
    MissingTable(&'static str),

    #[error("policy kind `{0}` needs a random stream")]
    MissingRng(&'static str),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("config: {0}")]
    Config(String),

    #[error("malformed policy file {path}: {reason}")]
    PolicyFile { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
