use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("integral is divergent at (x = {x}, r = {r})")]
    SingularPoint { x: f64, r: f64 },

    #[error("quadrature tolerance not met: value {value:e}, error estimate {error:e}")]
    ToleranceNotMet { value: f64, error: f64 },

    #[error("unstable division: denominator {denominator:e} with error {error:e}")]
    DivisionInstability { denominator: f64, error: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("start point {0:?} is not inside the domain")]
    StartOutsideDomain(Vec<f64>),

    #[error("censoring rate {rate:.4} exceeds {limit:.4}")]
    ExcessCensoring { rate: f64, limit: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
