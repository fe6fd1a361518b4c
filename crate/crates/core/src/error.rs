use thiserror::Error;

use crate::types::Label;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability row has no positive entry")]
    AllZero,

    #[error("negative probability {value} at label {label}")]
    NegativeEntry { label: Label, value: f64 },

    #[error("non-finite probability at label {label}")]
    NonFinite { label: Label },

    #[error("probability row sums to {sum}, more than 1e-2 away from 1")]
    RowSum { sum: f64 },

    #[error("expected {expected} probabilities, got {got}")]
    WrongLength { expected: usize, got: usize },

    #[error("label space needs at least 2 labels, got {0}")]
    TooFewLabels(usize),

    #[error("label {label} outside 1..={k}")]
    UnknownLabel { label: Label, k: usize },

    #[error("example {id:?} has no gold label")]
    MissingGold { id: String },

    #[error("duplicate example id {0:?}")]
    DuplicateId(String),

    #[error("label {0} listed twice")]
    DuplicateLabel(Label),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty input")]
    EmptyInput,

    #[error("empty prediction set")]
    EmptySet,

    #[error("inputs mix label counts {0} and {1}")]
    MixedK(usize, usize),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),

    #[error("fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),

    #[error("unknown score kind {0:?}, expected naive, aps or raps")]
    UnknownScore(String),

    #[error("non-finite calibration score")]
    NonFiniteScore,

    #[error("invalid coarse map: {0}")]
    CoarseMap(String),
}

pub type Result<T> = std::result::Result<T, Error>;
