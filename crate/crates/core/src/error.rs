use thiserror::Error;

use crate::models::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} lies outside the observation window [{start}, {end}]")]
    OutsideWindow { t: f64, start: f64, end: f64 },

    #[error("invalid model: {}", join_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("invalid event sequence: {0}")]
    InvalidEvents(String),

    #[error("insufficient events: {0}")]
    InsufficientEvents(String),

    #[error("wrong model kind: {0}")]
    WrongKind(String),

    #[error("bootstrap degenerate: only {used} of {requested} replicates usable")]
    BootstrapDegenerate { used: usize, requested: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
