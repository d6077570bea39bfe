use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::quad::QuadError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    /// A standing assumption of the model (C1..C8) fails for the given data.
    #[error("model violation of {condition}: {detail}")]
    Model {
        condition: &'static str,
        detail: String,
    },
    #[error("invalid config at `{key}`: {detail}")]
    Config { key: String, detail: String },
    #[error("missing declared bound {symbol} at rho = {rho}")]
    MissingBound { symbol: String, rho: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("sweep contradiction: {0}")]
    Contradiction(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn model(condition: &'static str, detail: impl Into<String>) -> Self {
        Error::Model {
            condition,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            detail: detail.into(),
        }
    }
}
