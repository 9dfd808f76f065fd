use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("graph is disconnected: vertex {vertex} is unreachable")]
    Disconnected { vertex: usize },
    #[error("unsupported moment k = {0} (supported: 1..=5)")]
    UnsupportedMoment(usize),
    #[error("dimension {dim} exceeds the limit {limit}")]
    TooLarge { dim: u128, limit: u128 },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("no convergence after {iterations} matvecs (estimate {estimate}, residual {residual:e})")]
    Convergence {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("vacuous bound: {0}")]
    Vacuous(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSize(_) => "invalid-size",
            Error::Parse(_) => "parse",
            Error::Disconnected { .. } => "disconnected",
            Error::UnsupportedMoment(_) => "unsupported-moment",
            Error::TooLarge { .. } => "too-large",
            Error::Budget(_) => "budget",
            Error::Convergence { .. } => "convergence",
            Error::Precondition(_) => "precondition",
            Error::Vacuous(_) => "vacuous",
            Error::Invalid(_) => "invalid",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Returns `base^exp` as `u128`, or `TooLarge` if it does not fit or exceeds `limit`.
pub(crate) fn checked_dim(base: usize, exp: usize, limit: u128) -> Result<usize> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
        if acc > limit {
            return Err(Error::TooLarge {
                dim: acc,
                limit,
            });
        }
    }
    Ok(acc as usize)
}
