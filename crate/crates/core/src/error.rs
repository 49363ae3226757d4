use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the physical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A rate that appears in a denominator vanishes.
    #[error("lossless limit: {0}")]
    LosslessLimit(String),

    /// The resonator loop is exactly on a lossless pole.
    #[error("pole: {0}")]
    Pole(String),

    /// The coupled linear system could not be factorised.
    #[error("singular system ({detail}); pivot ratio {pivot_ratio:e}")]
    Singular { detail: String, pivot_ratio: f64 },

    /// A root bracket did not contain a sign change.
    #[error("bracket failure on [{lo:e}, {hi:e}]: {detail}")]
    Bracket { lo: f64, hi: f64, detail: String },

    /// A pointwise evaluation inside a scan failed.
    #[error("grid point {index}: {source}")]
    AtGridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the caller's data rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Domain(_) | Error::Input(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => true,
            Error::AtGridPoint { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
