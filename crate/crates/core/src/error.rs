use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A distribution, configuration or operation argument is out of range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient data: need more than {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// Every observation (and hence `v_p`) is exactly zero.
    #[error("degenerate series: all observations are zero")]
    DegenerateSeries,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    /// The simulated recursion left the range of `f64`.
    #[error("simulation overflowed at step {step}")]
    Overflow { step: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// Root finding or quadrature failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
