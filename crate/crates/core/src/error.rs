use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("infeasible instance: {entities} entities cannot fill {k} clusters of at least {n}")]
    Infeasible { entities: usize, k: usize, n: usize },

    #[error(
        "degenerate instance: min observations {min_obs} x min cluster size {n} must exceed J+1 = {}",
        .j + 1
    )]
    Degenerate { min_obs: usize, n: usize, j: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("refusing to enumerate: {0}")]
    TooLarge(String),

    #[error("restricted master problem is infeasible")]
    MasterInfeasible,

    #[error("linear programming failure: {0}")]
    Solver(String),

    #[error("column pool admits no integral cover")]
    NoIntegralCover,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
