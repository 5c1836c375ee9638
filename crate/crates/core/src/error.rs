use thiserror::Error;

use crate::Layer;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid process: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("layer mismatch: expected {expected} input, got {actual}")]
    LayerMismatch { expected: Layer, actual: Layer },

    #[error("size error: {0}")]
    Size(String),

    #[error("insufficient data: need at least {required} values, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("ill-conditioned matrix: condition estimate {condition:e} exceeds {threshold:e}")]
    IllConditioned { condition: f64, threshold: f64 },

    #[error(
        "degenerate return constraint: drift is proportional to the all-ones vector \
         (determinant {determinant:e}); use the global minimum strategy instead"
    )]
    DegenerateConstraint { determinant: f64 },

    #[error("degenerate window: {0}")]
    DegenerateWindow(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "invalid_spec",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::LayerMismatch { .. } => "layer_mismatch",
            Error::Size(_) => "size",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotSymmetric(_) => "not_symmetric",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::DegenerateConstraint { .. } => "degenerate_constraint",
            Error::DegenerateWindow(_) => "degenerate_window",
            Error::Parse { .. } => "parse",
            Error::MissingColumn(_) => "missing_column",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}
