use thiserror::Error;

/// Errors raised by model construction, simulation, estimation and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no stationary operating point: {0}")]
    NoStationaryPoint(String),

    #[error("disconnected network: generator {0} is not connected to the reference")]
    DisconnectedNetwork(usize),

    #[error("numerical divergence at step {step}")]
    NumericalDivergence { step: usize },

    #[error("gain shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    GainShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-diagonalizable within tolerance (eigenvector condition number {0:e})")]
    NonDiagonalizable(f64),

    #[error("eigenvalue computation did not converge")]
    EigenNoConvergence,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("sampling step too coarse: discrete eigenvalue {0} lies on the negative real axis")]
    Aliasing(String),

    #[error("training divergence: {0}")]
    TrainingDivergence(String),

    #[error("episode finished")]
    EpisodeFinished,

    #[error("invalid delay {0}")]
    InvalidDelay(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid model data: {0}")]
    InvalidModel(String),

    #[error("empty replay buffer")]
    EmptyBuffer,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// Builds a parse error from a TOML deserialization failure, resolving the
    /// byte span into a 1-based line number.
    pub fn from_toml(source: &str, err: &toml::de::Error) -> Self {
        let line = err
            .span()
            .map(|span| source[..span.start.min(source.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            line,
            message: err.message().to_string(),
        }
    }
}
