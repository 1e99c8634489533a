use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("route infeasible: working time {working_time} exceeds limit {limit}")]
    RouteInfeasible { working_time: i64, limit: i64 },

    #[error("infeasible solution: {0}")]
    InfeasibleSolution(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("core route set does not cover mandatory customer {0}")]
    IncompleteCore(usize),

    #[error("time limit reached: {0}")]
    TimeLimit(String),

    #[error("certificate violated: {0}")]
    Certificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
