use thiserror::Error;

use crate::instance::ModelError;
use crate::oracle::OracleError;

#[derive(Debug, Error, PartialEq)]
pub enum AlgoError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("{size} edges exceed the exact-mode limit of {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("exact search gave up after {0} feasible sets")]
    SearchBudget(usize),
    #[error("run was not recorded in certify mode")]
    NotCertified,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
