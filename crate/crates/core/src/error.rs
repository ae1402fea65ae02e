use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Double precision is only validated up to 100 photons.
    #[error("N = {0} exceeds the double-precision limit of {max}", max = crate::MAX_PHOTONS)]
    Precision(usize),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("outcome has zero probability")]
    ZeroProbability,

    #[error("step index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),

    #[error("posterior is too flat to define a mean direction")]
    FlatPosterior,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("no trained policy for N = {0:?}")]
    MissingPolicies(Vec<usize>),

    #[error("{family} fit infeasible: {reason}")]
    InfeasibleFit { family: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingInput(_) | Error::MissingPolicies(_) => 3,
            Error::Io(e) if e.kind() == io::ErrorKind::NotFound => 3,
            _ => 2,
        }
    }
}
