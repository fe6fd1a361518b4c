//! Evaluation: ordinal agreement, coverage diagnostics, stratified splitting
//! and alpha sweeps.

pub mod agreement;
pub mod diagnostics;
pub mod report;
pub mod split;
pub mod sweep;

pub use agreement::{basic_metrics, coarse_accuracy, qwk, BasicMetrics, CoarseMap, CoarseMaps, QwkAccumulator};
pub use diagnostics::{
    failure_rates, redistribution, FailureRates, GroupFailure, RedistributionReport, ShrinkHistogram,
};
pub use report::{evaluate, EvaluationInput, EvaluationReport};
pub use split::{first_split_size, stratified_split, ClassCounts, StratifiedSplit};
pub use sweep::{alpha_sweep, SweepRow, DEFAULT_ALPHA_GRID};
