use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("parameter assumptions violated:\n{0}")]
    Assumption(String),
    #[error("non-finite value in {what} at iteration {k} (last good iteration {})", k.saturating_sub(1))]
    NonFinite { k: usize, what: String },
    #[error("iteration {k} failed (last good iteration {}): {source}", k.saturating_sub(1))]
    Iteration { k: usize, source: Box<Error> },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("parallel executor: {0}")]
    Parallel(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
