//! Crate-level error type.

use num_bigint::BigInt;
use thiserror::Error;

use crate::matmod::MatrixError;
use crate::modint::ArithError;
use crate::symbols::SymbolError;

/// Errors surfaced by the public operations of the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("the matrix is not symmetric")]
    NotSymmetric,
    #[error("the form is degenerate (zero determinant)")]
    Degenerate,
    #[error("precision k = {k} is too low, at least {required} is needed")]
    PrecisionTooLow { k: u32, required: u32 },
    #[error("{t} has no primitive representation (certified modulo {certified_modulus})")]
    NoRepresentation { t: BigInt, certified_modulus: BigInt },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("representation known modulo p^{m} but lifting needs p^{required}")]
    ThresholdNotMet { m: u32, required: u32 },
    #[error("randomized search exhausted its budget in stage `{stage}`")]
    RetriesExhausted { stage: String },
    #[error("the forms are inequivalent: {0}")]
    Inequivalent(String),
    #[error("zero input")]
    ZeroInput,
    #[error("universe too large: {0}")]
    UniverseTooLarge(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Builds a `RetriesExhausted` error for the named stage.
    pub fn retries(stage: &str) -> Self {
        Error::RetriesExhausted {
            stage: stage.to_string(),
        }
    }

    /// Builds an `Internal` error from any displayable message.
    pub fn internal(msg: impl std::fmt::Display) -> Self {
        Error::Internal(msg.to_string())
    }
}

/// Result alias using the crate error.
pub type Result<T> = std::result::Result<T, Error>;
