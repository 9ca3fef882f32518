use thiserror::Error;

/// Errors surfaced by the recovery pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("reference signal has zero norm")]
    InvalidReferenceSignal,

    #[error("all measurement magnitudes are zero")]
    DegenerateMeasurements,

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("ill-conditioned system (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("instance too large for the vertex oracle (n <= {max_n}, m <= {max_m} required)")]
    OracleScale { max_n: usize, max_m: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
