use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// A point of the wrong kind was passed to a space.
    #[error("point kind mismatch: expected {expected}, got {got}")]
    PointKind { expected: &'static str, got: &'static str },

    /// Non-finite or malformed numerical data.
    #[error("invalid data: {0}")]
    Data(String),

    /// The mass matrix could not be factored.
    #[error("mass matrix is numerically singular (smallest pivot {smallest_pivot:e} at row {row})")]
    Conditioning { smallest_pivot: f64, row: usize },

    #[error("truncated kernel has a row of zero mass at node {node} (r = {r})")]
    DegenerateTruncation { node: usize, r: f64 },

    /// A fit or verdict could not be decided from the available data.
    #[error("undetermined: {0}")]
    Undetermined(String),

    #[error("under-resolved quadrature: {0}")]
    Resolution(String),

    /// The basis is not compatible with the requested operator.
    #[error("basis not domain-compatible: {0}")]
    Domain(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::ParameterDomain(msg.into()))
}
