use thiserror::Error;

use crate::model::Side;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("value {value} at {side:?}[{row}, {column}] lies outside the support of its prior")]
    SupportViolation {
        side: Side,
        row: usize,
        column: usize,
        value: f64,
    },

    /// The partner column of `column` has collapsed: `B[k,k]` is at or below
    /// the dead-source threshold.
    #[error("dead source in column {column} (B[k,k] = {b_kk:e})")]
    DeadSource { column: usize, b_kk: f64 },

    #[error("truncation region [{lower}, {upper}] is empty at float precision")]
    EmptyRegion { lower: f64, upper: f64 },

    #[error("need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}
