//! Dot-product factor model, losses, correlation regularizer and trainer.

mod checkpoint;
mod loss;
mod recommend;
mod train;

use ndarray::{Array2, ArrayView1};
use rand::Rng as _;
use thiserror::Error;

use crate::sampling::SamplingError;
use crate::scalar::Scalar;
use crate::seed;

pub use crate::sampling::{Objective, SamplerKind};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader};
pub use loss::{
    correlation_penalty, evaluate_batch, pairwise_loss, pearson, pointwise_loss, Batch,
    BatchResult, Gradient, LOG_EPS,
};
pub use recommend::{baseline_mostpop, baseline_random, recommend_topk, top_k_unobserved};
pub use train::{train, EpochTrace, TrainConfig, TrainOutput, Trainer};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("index out of range: {what} {index} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("correlation needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite gradient or loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// User matrix `W` (M×D) and item matrix `X` (N×D); `score(u, i) = W[u]·X[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel<F> {
    users: Array2<F>,
    items: Array2<F>,
}

impl<F: Scalar> FactorModel<F> {
    /// Every entry i.i.d. uniform on `[0, 1]`.
    pub fn init(n_users: usize, n_items: usize, dim: usize, seed: u64) -> Result<Self> {
        if n_users == 0 || n_items == 0 || dim == 0 {
            return Err(ModelError::InvalidConfig(format!(
                "model dimensions must be positive, got {n_users}×{n_items}×{dim}"
            )));
        }
        let mut rng = seed::rng(seed);
        let mut draw = |n: usize| -> Array2<F> {
            Array2::from_shape_simple_fn((n, dim), || F::of(rng.gen::<f64>()))
        };
        let users = draw(n_users);
        let items = draw(n_items);
        Ok(Self { users, items })
    }

    pub fn from_parts(users: Array2<F>, items: Array2<F>) -> Result<Self> {
        if users.ncols() != items.ncols() {
            return Err(ModelError::Shape(format!(
                "user dim {} != item dim {}",
                users.ncols(),
                items.ncols()
            )));
        }
        Ok(Self { users, items })
    }

    pub fn n_users(&self) -> usize {
        self.users.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.items.nrows()
    }

    pub fn dim(&self) -> usize {
        self.users.ncols()
    }

    pub fn users(&self) -> &Array2<F> {
        &self.users
    }

    pub fn items(&self) -> &Array2<F> {
        &self.items
    }

    pub fn users_mut(&mut self) -> &mut Array2<F> {
        &mut self.users
    }

    pub fn items_mut(&mut self) -> &mut Array2<F> {
        &mut self.items
    }

    pub fn user(&self, u: usize) -> ArrayView1<'_, F> {
        self.users.row(u)
    }

    pub fn item(&self, i: usize) -> ArrayView1<'_, F> {
        self.items.row(i)
    }

    /// Predicted relevance of item `i` for user `u`.
    pub fn score(&self, u: usize, i: usize) -> Result<F> {
        if u >= self.n_users() {
            return Err(ModelError::IndexOutOfRange {
                what: "user",
                index: u,
                size: self.n_users(),
            });
        }
        if i >= self.n_items() {
            return Err(ModelError::IndexOutOfRange {
                what: "item",
                index: i,
                size: self.n_items(),
            });
        }
        Ok(self.score_unchecked(u, i))
    }

    pub(crate) fn score_unchecked(&self, u: usize, i: usize) -> F {
        self.users.row(u).dot(&self.items.row(i))
    }

    /// Scores of every item for user `u`.
    pub fn user_scores(&self, u: usize) -> Vec<F> {
        self.items.dot(&self.users.row(u)).to_vec()
    }

    pub fn is_finite(&self) -> bool {
        self.users
            .iter()
            .chain(self.items.iter())
            .all(|v| v.is_finite())
    }
}

/// Convenience wrapper for [`FactorModel::init`].
pub fn init_model<F: Scalar>(
    n_users: usize,
    n_items: usize,
    dim: usize,
    seed: u64,
) -> Result<FactorModel<F>> {
    FactorModel::init(n_users, n_items, dim, seed)
}
