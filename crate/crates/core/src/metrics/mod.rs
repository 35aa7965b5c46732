//! Evaluation: popularity-bias measures, ranking accuracy, beyond-accuracy
//! measures and internal-mechanics diagnostics.
//!
//! Every function here is pure over its inputs.

mod accuracy;
mod bias;
mod diagnostics;
mod report;
mod run;

use thiserror::Error;

pub use accuracy::{coverage, novelty, ranking_accuracy, RankingAccuracy};
pub use bias::{exposure_probability, gini, ieo, isp, isp_over, true_positive_rate, Exposure};
pub use diagnostics::{
    pairwise_accuracy_buckets, relevance_distribution_sample, CellAccuracy, PairwiseAccuracyTable,
    RelevanceSample, UnobservedTarget,
};
pub use report::{evaluate_run, MetricEntry, MetricReport, Variant, METRICS, TREATMENT_HEADER};
pub use run::RecommendationRun;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("gini is undefined for an empty vector")]
    EmptyVector,
    #[error("negative value {value} at position {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("no test interactions to evaluate against")]
    EmptyTest,
    #[error("{0}")]
    Precondition(String),
    #[error("run covers {run} users but the split has {split}")]
    UserMismatch { run: usize, split: usize },
    #[error("malformed run line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;
