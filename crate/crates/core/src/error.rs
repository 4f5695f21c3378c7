use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("enumeration budget exceeded: {needed} subsets needed, budget is {budget}; use a sampled estimate instead")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("least squares on {size} columns is underdetermined with {rows} measurements")]
    RankDeficient { size: usize, rows: usize },

    #[error("bound undefined: {0}")]
    BoundUndefined(String),

    #[error("bound not applicable: {0}")]
    NotApplicable(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
