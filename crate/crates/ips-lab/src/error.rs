use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("state space too large: {0}")]
    StateSpaceTooLarge(String),
    #[error("query outside graphical representation horizon: {0}")]
    OutOfHorizon(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("population guard exceeded: {0}")]
    PopulationGuard(String),
    #[error("shooting bracket failure: {0}")]
    BracketFailure(String),
    #[error("divergent series: {0}")]
    DivergentSeries(String),
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
