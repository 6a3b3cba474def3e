use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the group-testing engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state index {index} out of range for {m} tests")]
    StateOutOfRange { index: u64, m: usize },

    #[error("{m} tests exceed the trellis state-width cap of {cap}")]
    TooManyTests { m: usize, cap: usize },

    #[error("test vector {0} is not a reachable syndrome of the test matrix")]
    NotASyndrome(String),

    #[error("test outcome has zero likelihood under every reachable syndrome")]
    ZeroLikelihood,

    #[error("noisy observation models require the complete trellis, got a {0} trellis")]
    NoisyRequiresComplete(&'static str),

    #[error("trellis was built for a different test vector")]
    TrellisMismatch,

    #[error("{what} guard exceeded: {count} > {limit}")]
    GuardExceeded {
        what: &'static str,
        count: u128,
        limit: u128,
    },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
