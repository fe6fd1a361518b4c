//! Conformal prediction sets and ordinal decoding for classifiers that emit
//! a probability distribution over `k` ordered levels.
//!
//! The pipeline is: score calibration examples at their gold label
//! ([`scores`]), fit a split-conformal threshold ([`conformal`]), build a
//! label set per new example, renormalize the posterior inside it and decode
//! the rounded in-set mean ([`decode`]). [`metrics`] evaluates the result
//! with ordinal-aware metrics and coverage diagnostics.

pub mod cli;
pub mod conformal;
pub mod decode;
pub mod error;
pub mod io;
pub mod metrics;
pub mod scores;
pub mod synth;
pub mod types;

pub use conformal::{
    average_set_size, calibrate, empirical_coverage, predict_set, CalibratedThreshold, CalibrationRecord,
};
pub use decode::{decode_mean, decode_oracle, document_level, ensemble_average, ensemble_vote, Decoder};
pub use error::{Error, Result};
pub use scores::{rank, score, score_all, ScoreKind, SortedRanking};
pub use types::{argmax_label, normalize, Example, Label, LabelSpace, LabeledBatch, PredictionSet, ProbabilityVector};
