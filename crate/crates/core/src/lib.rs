//! Popularity-bias measurement and mitigation for learning-to-rank
//! collaborative filtering.
//!
//! The crate trains dot-product factor models under point-wise (logistic) and
//! pair-wise (BPR) objectives, optionally with popularity-balanced negative
//! mining and a correlation regularizer that penalizes the dependence between
//! per-example loss and observed-item popularity. Evaluation covers item
//! statistical parity (ISP), item equal opportunity (IEO), ranking accuracy,
//! novelty, coverage, and a few internal-mechanics diagnostics.
//!
//! Model math is generic over the floating-point type; [`FactorModel64`] and
//! [`FactorModel32`] are the concrete instantiations.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod rerank;
pub mod sampling;
pub mod scalar;
pub mod seed;

pub use data::{Bucket, Interaction, InteractionDataset, PopularityStats, Relation, SplitDataset};
pub use metrics::{MetricReport, RecommendationRun};
pub use model::{FactorModel, Objective, SamplerKind, TrainConfig};
pub use scalar::Scalar;

/// Double-precision factor model.
pub type FactorModel64 = model::FactorModel<f64>;
/// Single-precision factor model.
pub type FactorModel32 = model::FactorModel<f32>;
/// Double-precision training configuration.
pub type TrainConfig64 = model::TrainConfig<f64>;
/// Single-precision training configuration.
pub type TrainConfig32 = model::TrainConfig<f32>;
/// Double-precision batch evaluation.
pub type BatchResult64 = model::BatchResult<f64>;
