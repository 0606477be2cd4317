use thiserror::Error;

/// Errors shared across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A path left the spatial box; carries the exit time.
    #[error("path exited the lattice box at t = {exit_time}")]
    BoxExit { exit_time: f64 },

    #[error("covariance matrix is not positive semi-definite (pivot {pivot} at row {row})")]
    NotPsd { row: usize, pivot: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
