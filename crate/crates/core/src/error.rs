use thiserror::Error;

/// Library-wide error type. Variants map onto the CLI exit-code contract:
/// config/parameter problems exit 2, failed verifications exit 1.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its mathematical domain.
    #[error("parameter out of domain: {0}")]
    Param(String),

    /// The request would exceed addressable resources (e.g. more than 2^31 cells).
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// A numerical value required to be finite was not.
    #[error("numerical domain error: {0}")]
    Numerical(String),

    /// The operation is not defined for this configuration (e.g. pointwise
    /// evaluation of the wave kernel in dimension >= 3).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Quadrature failed to reach the requested tolerance; carries the best
    /// estimate and its error bound.
    #[error("accuracy not reached: estimate {estimate}, error bound {error_bound} ({context})")]
    Accuracy {
        estimate: f64,
        error_bound: f64,
        context: String,
    },

    /// An operation was refused because the existence verdict for the
    /// configuration is negative.
    #[error("refused: {0}")]
    Refused(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
