use thiserror::Error;

/// Errors raised by the tracking library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("anchor lies inside or on the object boundary")]
    AnchorInsideObject,
    #[error("angular sector is empty")]
    EmptySector,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("matrix is not positive semidefinite")]
    NotPsd,
    #[error("normalized amplitude must be positive, got {0}")]
    NonPositiveAmplitude(f64),
    #[error("all particle weights vanished (filter divergence)")]
    AllWeightsZero,
    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("information matrix is singular")]
    SingularInformation,
    #[error("degenerate trajectory specification: {0}")]
    DegenerateSpec(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
