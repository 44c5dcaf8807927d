use thiserror::Error;

/// Errors produced by the pricing library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("integrand is not finite at node {index} (x = {node})")]
    NonFiniteIntegrand { index: usize, node: f64 },

    #[error("all log terms are -inf: zero-mass state")]
    ZeroMass,

    #[error("time {t} is outside the admissible range [{lower}, {upper}]")]
    TimeOutOfRange { t: f64, lower: f64, upper: f64 },

    #[error("no root: function keeps a {} sign over the expansion range", if *.positive { "positive" } else { "negative" })]
    NoSignChange { positive: bool },

    #[error("filter mass collapsed at step {step}")]
    MassCollapse { step: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    #[error("missing information state for factor `{0}`")]
    MissingFactorState(String),

    #[error("payoff needs a {dims}-dimensional tensor quadrature (limit {limit}); price this flow by Monte Carlo instead")]
    TensorTooLarge { dims: usize, limit: usize },

    #[error("payoff expression error at position {pos}: {msg}")]
    Expression { pos: usize, msg: String },

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
