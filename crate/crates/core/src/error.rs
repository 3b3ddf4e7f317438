use thiserror::Error;

/// Errors produced by the estimators, training loops and data loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("at least 2 samples are required, got {0}")]
    InsufficientSamples(usize),

    #[error("response is constant")]
    DegenerateResponse,

    #[error("zero denominator: the response is sample-wise a function of the conditioning set")]
    DegenerateDenominator,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("backward already ran on this graph; reset gradients before running it again")]
    DoubleBackward,

    #[error("loss must be a 1x1 scalar, got {0}x{1}")]
    NonScalarLoss(usize, usize),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("column `{column}` is not numeric (line {line}: `{value}`)")]
    NonNumericColumn {
        column: String,
        line: usize,
        value: String,
    },

    #[error("no rows left after dropping rows with missing values")]
    EmptyAfterFiltering,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by degenerate input data rather than misuse.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateResponse
                | Error::DegenerateDenominator
                | Error::InsufficientSamples(_)
                | Error::EmptyAfterFiltering
        )
    }
}
