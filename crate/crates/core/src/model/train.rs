use std::collections::BTreeMap;

use super::loss::{evaluate_batch, pearson, Batch};
use super::{FactorModel, ModelError, Result};
use crate::data::{PopularityStats, SplitDataset};
use crate::sampling::{Examples, Objective, Sampler, SamplerKind};
use crate::scalar::Scalar;
use crate::seed::{self, stream};

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<F> {
    pub dim: usize,
    pub learning_rate: F,
    /// Weight of the L2 term.
    pub l2: F,
    /// Trade-off between accuracy loss and correlation penalty, in `[0, 1]`.
    pub lambda: F,
    /// Negatives per observed pair.
    pub t: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub objective: Objective,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        Self {
            dim: 32,
            learning_rate: F::of(5.0),
            l2: F::of(0.001),
            lambda: F::of(0.2),
            t: 4,
            batch_size: 256,
            epochs: 30,
            seed: 0,
            sampler: SamplerKind::Standard,
            objective: Objective::Pairwise,
        }
    }
}

impl<F: Scalar> TrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.dim == 0 {
            return bad("dim must be ≥ 1".into());
        }
        if !(self.lambda >= F::zero() && self.lambda <= F::one()) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.learning_rate > F::zero()) || !self.learning_rate.is_finite() {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.l2 >= F::zero()) || !self.l2.is_finite() {
            return bad(format!("l2 must be ≥ 0, got {}", self.l2));
        }
        if self.t == 0 {
            return bad("t must be ≥ 1".into());
        }
        if self.sampler == SamplerKind::Balanced && !self.t.is_multiple_of(2) {
            return bad(format!("balanced sampling needs an even t, got {}", self.t));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1".into());
        }
        if self.lambda > F::zero() && self.batch_size < 2 {
            return bad("batch_size must be ≥ 2 when lambda > 0".into());
        }
        Ok(())
    }

    /// Stable `key=value` rendering, used for hashing and provenance.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("dim".into(), self.dim.to_string());
        m.insert("learning_rate".into(), self.learning_rate.to_string());
        m.insert("l2".into(), self.l2.to_string());
        m.insert("lambda".into(), self.lambda.to_string());
        m.insert("t".into(), self.t.to_string());
        m.insert("batch_size".into(), self.batch_size.to_string());
        m.insert("epochs".into(), self.epochs.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("sampler".into(), self.sampler.to_string());
        m.insert("objective".into(), self.objective.to_string());
        m.insert("dtype".into(), F::NAME.to_string());
        m
    }

    /// FNV-1a hash of [`TrainConfig::snapshot`].
    pub fn hash(&self) -> u64 {
        let text: String = self
            .snapshot()
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        seed::fnv1a(text.as_bytes())
    }
}

/// Per-epoch training diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochTrace {
    pub epoch: usize,
    /// Mean accuracy loss (including L2) over the epoch's batches.
    pub mean_loss: f64,
    /// Mean penalty over batches where it entered the objective; 0 when λ = 0.
    pub mean_penalty: f64,
    /// Mean per-batch Pearson correlation between observed-item popularity
    /// and the relevance predicted for that item.
    pub mean_pop_relevance_corr: f64,
}

impl EpochTrace {
    pub const CSV_HEADER: &'static str = "epoch,mean_loss,mean_penalty,mean_pop_relevance_corr";

    pub fn render_csv(trace: &[EpochTrace]) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for e in trace {
            s.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.mean_loss, e.mean_penalty, e.mean_pop_relevance_corr
            ));
        }
        s
    }
}

/// Final model and trace of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutput<F> {
    pub model: FactorModel<F>,
    pub trace: Vec<EpochTrace>,
}

/// Stateful SGD trainer; [`train`] drives it for the configured epochs.
pub struct Trainer<'a, F> {
    cfg: TrainConfig<F>,
    model: FactorModel<F>,
    sampler: Sampler<'a>,
    epoch: usize,
}

impl<'a, F: Scalar> Trainer<'a, F> {
    pub fn new(
        split: &'a SplitDataset,
        stats: &'a PopularityStats,
        cfg: TrainConfig<F>,
    ) -> Result<Self> {
        cfg.validate()?;
        let model = FactorModel::init(
            split.n_users,
            split.n_items,
            cfg.dim,
            seed::derive(cfg.seed, stream::INIT),
        )?;
        Self::with_model(split, stats, cfg, model)
    }

    /// Starts from an existing model instead of a fresh initialization.
    pub fn with_model(
        split: &'a SplitDataset,
        stats: &'a PopularityStats,
        cfg: TrainConfig<F>,
        model: FactorModel<F>,
    ) -> Result<Self> {
        cfg.validate()?;
        if model.n_users() != split.n_users || model.n_items() != split.n_items {
            return Err(ModelError::Shape(format!(
                "model is {}×{}, split is {}×{}",
                model.n_users(),
                model.n_items(),
                split.n_users,
                split.n_items
            )));
        }
        let sampler = Sampler::new(
            split,
            stats,
            cfg.sampler,
            cfg.objective,
            cfg.t,
            seed::derive(cfg.seed, stream::SAMPLER),
        )?;
        Ok(Self {
            cfg,
            model,
            sampler,
            epoch: 0,
        })
    }

    pub fn model(&self) -> &FactorModel<F> {
        &self.model
    }

    pub fn into_model(self) -> FactorModel<F> {
        self.model
    }

    /// Re-mines examples and runs one pass of mini-batch SGD.
    pub fn run_epoch(&mut self) -> Result<EpochTrace> {
        let examples = self.sampler.epoch();
        let trace = self.step_examples(&examples)?;
        self.epoch += 1;
        Ok(trace)
    }

    /// One SGD pass over the given examples, in order.
    pub fn step_examples(&mut self, examples: &Examples) -> Result<EpochTrace> {
        let bs = self.cfg.batch_size;
        let mut n_batches = 0usize;
        let mut loss_sum = 0.0;
        let mut penalty_sum = 0.0;
        let mut penalty_batches = 0usize;
        let mut corr_sum = 0.0;
        let mut corr_batches = 0usize;

        let batches: Vec<Batch<'_>> = match examples {
            Examples::Pointwise(v) => v.chunks(bs).map(Batch::Pointwise).collect(),
            Examples::Pairwise(v) => v.chunks(bs).map(Batch::Pairwise).collect(),
        };
        for (b, batch) in batches.into_iter().enumerate() {
            if let Some(c) = observed_pop_relevance_corr(&self.model, batch) {
                corr_sum += c;
                corr_batches += 1;
            }
            let (res, grad) =
                evaluate_batch(&self.model, batch, self.cfg.l2, self.cfg.lambda, true)?;
            let grad = grad.expect("gradient requested");
            if !res.objective.is_finite() || !grad.is_finite() {
                return Err(ModelError::NonFinite {
                    epoch: self.epoch,
                    batch: b,
                });
            }
            grad.apply(&mut self.model, self.cfg.learning_rate);
            n_batches += 1;
            loss_sum += res.accuracy_loss.f64();
            if self.cfg.lambda > F::zero() && batch.len() >= 2 {
                penalty_sum += res.penalty.f64();
                penalty_batches += 1;
            }
        }
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        Ok(EpochTrace {
            epoch: self.epoch,
            mean_loss: mean(loss_sum, n_batches),
            mean_penalty: mean(penalty_sum, penalty_batches),
            mean_pop_relevance_corr: mean(corr_sum, corr_batches),
        })
    }
}

/// Pearson correlation between the popularity of each example's observed item
/// and its predicted relevance; `None` for batches with fewer than two
/// observed items.
fn observed_pop_relevance_corr<F: Scalar>(model: &FactorModel<F>, batch: Batch<'_>) -> Option<f64> {
    let (pops, scores): (Vec<f64>, Vec<f64>) = match batch {
        Batch::Pairwise(v) => v
            .iter()
            .map(|e| (e.pos_pop, model.score_unchecked(e.user, e.pos_item).f64()))
            .unzip(),
        Batch::Pointwise(v) => v
            .iter()
            .filter(|e| e.label)
            .map(|e| (e.item_pop, model.score_unchecked(e.user, e.item).f64()))
            .unzip(),
    };
    if pops.len() < 2 {
        return None;
    }
    pearson(&pops, &scores).ok()
}

/// Trains a model on `split` with the regularized objective.
pub fn train<F: Scalar>(
    split: &SplitDataset,
    stats: &PopularityStats,
    cfg: &TrainConfig<F>,
) -> Result<TrainOutput<F>> {
    let mut trainer = Trainer::new(split, stats, cfg.clone())?;
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let t = trainer.run_epoch()?;
        log::debug!(
            "epoch {} loss {:.5} penalty {:.5} corr {:.5}",
            t.epoch,
            t.mean_loss,
            t.mean_penalty,
            t.mean_pop_relevance_corr
        );
        trace.push(t);
    }
    Ok(TrainOutput {
        model: trainer.into_model(),
        trace,
    })
}
