use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} lies outside the domain [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid acceptance curve: {0}")]
    InvalidCurve(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("state budget exceeded: {states} states > limit {limit}")]
    StateBudget { states: usize, limit: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid policy spec `{0}`")]
    PolicySpec(String),

    #[error("simulation invariant violated at t={t}: {detail}")]
    Invariant { t: usize, detail: String },

    #[error("config parse error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
