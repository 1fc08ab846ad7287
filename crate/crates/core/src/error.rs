use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),
    #[error("no geodesic: {0}")]
    NoGeodesic(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
