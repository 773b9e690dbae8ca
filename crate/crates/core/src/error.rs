use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dimensions {0:?}: every mode must be positive")]
    InvalidDims((usize, usize, usize)),

    #[error("matrix is not orthogonal (residual {residual:.3e} exceeds {tol:.1e})")]
    NotOrthogonal { residual: f64, tol: f64 },

    #[error("truncation rank {k} out of range 1..={max}")]
    RankOutOfRange { k: usize, max: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("degenerate spectrum: singular value gap below {tol:.1e}")]
    DegenerateSpectrum { tol: f64 },

    #[error("gradient context does not match the supplied inputs")]
    ContextMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidDims(_) => "invalid_dims",
            Error::NotOrthogonal { .. } => "not_orthogonal",
            Error::RankOutOfRange { .. } => "rank_out_of_range",
            Error::Degenerate(_) => "degenerate",
            Error::DegenerateSpectrum { .. } => "degenerate_spectrum",
            Error::ContextMismatch => "context_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
