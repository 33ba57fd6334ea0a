//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by any operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A parameter value is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An operation was called in a way its contract forbids.
    #[error("usage error: {0}")]
    Usage(String),

    /// A file or byte stream does not conform to its format.
    #[error("format error: {0}")]
    Format(String),

    /// A model or ensemble file was written by an unknown format version.
    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    /// Text input (manifest, config, grid) failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A requested split or fold assignment cannot be satisfied.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Normal equations are singular; a positive ridge term is required.
    #[error("singular system: {0}; retry with ridge lambda > 0")]
    Singular(String),

    /// A metric is undefined for the given inputs (e.g. an empty class).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A gradient became NaN during optimization.
    #[error("NaN gradient in parameter '{param}' at step {step}")]
    NanGradient { param: String, step: u64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate misuse of the API or CLI rather than
    /// bad data on disk.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Parameter(_))
    }
}
