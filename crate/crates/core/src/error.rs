//! Error and refusal types. Mathematical refusals carry the violated
//! hypothesis as a structured reason so batch reports can state which
//! obstruction fired.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("variable-count mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("inner map has a constant term")]
    ConstantTerm,

    #[error("linear part is singular at the working tolerance")]
    SingularLinearPart,

    #[error("implicit equation is not contractive: linear-in-unknown part does not vanish at the origin")]
    NonContractive,

    #[error("resonance at (j={j}, exponent {multi:?}): divisor magnitude {mag_log2} (log2) inside guard band")]
    Resonance { j: usize, multi: Vec<i64>, mag_log2: f64 },

    #[error("ambiguous unit-size test: |value -/+ 1| between tolerance and its square root, refusing to classify")]
    AmbiguousUnitTest,

    #[error("eigenvalue collision within tolerance: distinct-eigenvalue hypothesis fails")]
    EigenvalueCollision,

    #[error("eigenvalue +1 or -1 detected: excluded for involution pairs with transverse fixed sets")]
    UnitEigenvalue,

    #[error("deck-transformation count {got} is not the expected power of two {expected}")]
    DeckCount { expected: usize, got: usize },

    #[error("quadratic map q has nontrivial zero set: branched-covering hypothesis fails")]
    ConditionB,

    #[error("mathematical refusal [{code}]: {reason}")]
    Refusal { code: &'static str, reason: String },

    #[error("hypothesis failed: {0}")]
    Hypothesis(String),

    #[error("precision exhausted: {0}")]
    Precision(String),

    #[error("invalid input: {0}")]
    Input(String),
}

impl Error {
    pub fn refusal(code: &'static str, reason: impl Into<String>) -> Self {
        Error::Refusal { code, reason: reason.into() }
    }

    /// Exit-code classification: mathematical refusals versus usage errors.
    pub fn is_refusal(&self) -> bool {
        !matches!(self, Error::Input(_) | Error::DimensionMismatch { .. })
    }
}
