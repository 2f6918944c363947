use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoError {
    /// An argument is outside the accepted range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A value violates a mathematical precondition (negative density, non-expanding map, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative routine failed to produce a usable result.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A catalog name could not be resolved.
    #[error("unknown {kind} `{name}`")]
    Lookup { kind: &'static str, name: String },
    /// An STO step failed on a specific fiber.
    #[error("fiber {fiber}: {source}")]
    Fiber {
        fiber: usize,
        #[source]
        source: Box<StoError>,
    },
    #[error("report assembly: {0}")]
    Report(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for StoError {
    fn from(e: std::io::Error) -> Self {
        StoError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, StoError>;

pub(crate) fn param(msg: impl Into<String>) -> StoError {
    StoError::Parameter(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> StoError {
    StoError::Domain(msg.into())
}
