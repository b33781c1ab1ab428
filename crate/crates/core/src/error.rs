use thiserror::Error;

/// Failures raised while building or evaluating a scenario.
///
/// Every validation failure names the invariant that did not hold; the CLI
/// prints the message verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("normalization check failed: norm^2 = {0}")]
    NotNormalized(f64),

    #[error("unitarity check failed: {0}")]
    NotUnitary(String),

    #[error("orthonormality check failed: {0}")]
    NotOrthonormal(String),

    #[error("projective measurement check failed: {0}")]
    NotProjective(String),

    #[error("unital channel check failed: {0}")]
    NotUnital(String),

    #[error("index out of range: {what} = {index}, limit {limit}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("invalid witness parameters: {0}")]
    InvalidQ(String),

    #[error("wrong parameter count: expected {expected}, got {actual}")]
    ParameterCount { expected: usize, actual: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("witness not applicable: {0}")]
    NotApplicable(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors caused by the environment rather than by the input.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}
