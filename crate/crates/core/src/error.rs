use thiserror::Error;

/// Unified error type for the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate geometry: sampling point within {eps:.3e} of sensor {sensor}")]
    DegenerateGeometry { sensor: usize, eps: f64 },

    #[error(
        "retarded time {t:.6} for sensor {sensor}, node {node} lies outside the usable time axis"
    )]
    RetardedTimeOutOfRange { sensor: usize, node: usize, t: f64 },

    #[error("direction node {node} has |x| = {k:.4}, beyond the reliable band k <= {limit:.4}")]
    MissingSpectrum { node: usize, k: f64, limit: f64 },

    #[error("excitation mismatch: operation requires {required} data, got {got}")]
    ExcitationMismatch { required: String, got: String },

    #[error("generating curve is not closed after reflection about the axis")]
    OpenCurve,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("reference field is identically zero")]
    ZeroReference,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error for `{field}`: {msg}")]
    Validation { field: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), msg: msg.into() }
    }

    /// Tags an error with the pipeline stage it surfaced in. Nested tags
    /// collapse to the outermost stage.
    pub fn staged(stage: &'static str, err: Error) -> Error {
        match err {
            Error::Stage { source, .. } => Error::Stage { stage, source },
            other => Error::Stage { stage, source: Box::new(other) },
        }
    }
}
