use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("iteration diverged at t={iteration}")]
    Diverged { iteration: usize },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("no contraction: rho={rho} is not below the boundary {boundary}")]
    NoContraction { rho: f64, boundary: f64 },

    #[error("iteration {requested} is outside the executed range 1..={executed}")]
    IterationOutOfRange { requested: usize, executed: usize },

    #[error("no estimate: {0}")]
    NoEstimate(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Short stable identifier, used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimensions(_) => "invalid-dimensions",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InvalidPrior(_) => "invalid-prior",
            Error::Diverged { .. } => "diverged",
            Error::ResourceLimit(_) => "resource-limit",
            Error::NoContraction { .. } => "no-contraction",
            Error::IterationOutOfRange { .. } => "iteration-out-of-range",
            Error::NoEstimate(_) => "no-estimate",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
