use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent or out-of-range configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An input is outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed file, header or tensor layout.
    #[error("format error: {0}")]
    Format(String),

    /// Non-finite values or a numerically degenerate problem.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Subspace estimation could not produce the requested number of paths.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Dataset generation could not satisfy its constraints.
    #[error("generation error: {0}")]
    Generation(String),

    /// The target of a tracking step carries too little energy to follow.
    #[error("track lost: {0}")]
    TrackLost(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
