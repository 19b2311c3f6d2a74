use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("channel {channel} out of range for {dim} channels")]
    ChannelOutOfRange { channel: usize, dim: usize },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Accuracy { achieved: f64, requested: f64 },

    #[error("series order {requested} exceeds truncation {available}")]
    Order { requested: usize, available: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error after {rows_written} rows: {source}")]
    Io {
        rows_written: usize,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
