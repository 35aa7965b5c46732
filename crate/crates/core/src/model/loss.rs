//! Per-example losses, the correlation penalty and the analytic gradient of
//! the regularized batch objective
//!
//! ```text
//! J = (1 − λ)·(mean_b A1(b) + mean_b ξ·‖rows of b‖²) + λ·|pearson(A1, A2)|
//! ```
//!
//! where `A1` holds per-example losses and `A2` per-example popularities.
//! `A2` does not depend on the parameters; gradients flow through `A1` only.

use std::collections::HashMap;

use ndarray::Array2;

use super::{FactorModel, ModelError, Result};
use crate::sampling::{PairwiseExample, PointwiseExample};
use crate::scalar::{sigmoid, Scalar};

/// Probabilities are clamped to `[LOG_EPS, 1 − LOG_EPS]` before taking logs.
pub const LOG_EPS: f64 = 1e-7;

/// A borrowed batch of training examples.
#[derive(Debug, Clone, Copy)]
pub enum Batch<'a> {
    Pointwise(&'a [PointwiseExample]),
    Pairwise(&'a [PairwiseExample]),
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        match self {
            Batch::Pointwise(b) => b.len(),
            Batch::Pairwise(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loss bookkeeping for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult<F> {
    /// `A1`: per-example accuracy loss without the L2 term.
    pub per_example_loss: Vec<F>,
    /// `A2`: per-example popularity.
    pub per_example_pop: Vec<F>,
    /// Mean of `A1` plus the L2 term.
    pub accuracy_loss: F,
    /// `|pearson(A1, A2)|`; zero when it did not enter the objective.
    pub penalty: F,
    /// `(1 − λ)·accuracy_loss + λ·penalty`.
    pub objective: F,
}

/// Sparse gradient over the user and item rows touched by a batch.
#[derive(Debug, Clone)]
pub struct Gradient<F> {
    dim: usize,
    users: RowAccumulator<F>,
    items: RowAccumulator<F>,
}

#[derive(Debug, Clone)]
struct RowAccumulator<F> {
    slot: HashMap<usize, usize>,
    rows: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> RowAccumulator<F> {
    fn new() -> Self {
        Self {
            slot: HashMap::new(),
            rows: Vec::new(),
            data: Vec::new(),
        }
    }

    fn row_mut(&mut self, row: usize, dim: usize) -> &mut [F] {
        let next = self.rows.len();
        let s = *self.slot.entry(row).or_insert(next);
        if s == next {
            self.rows.push(row);
            self.data.extend(std::iter::repeat_n(F::zero(), dim));
        }
        &mut self.data[s * dim..(s + 1) * dim]
    }
}

impl<F: Scalar> Gradient<F> {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            users: RowAccumulator::new(),
            items: RowAccumulator::new(),
        }
    }

    /// Touched user rows with their gradient, in first-touch order.
    pub fn user_rows(&self) -> impl Iterator<Item = (usize, &[F])> {
        let d = self.dim;
        self.users
            .rows
            .iter()
            .enumerate()
            .map(move |(s, &r)| (r, &self.users.data[s * d..(s + 1) * d]))
    }

    /// Touched item rows with their gradient, in first-touch order.
    pub fn item_rows(&self) -> impl Iterator<Item = (usize, &[F])> {
        let d = self.dim;
        self.items
            .rows
            .iter()
            .enumerate()
            .map(move |(s, &r)| (r, &self.items.data[s * d..(s + 1) * d]))
    }

    pub fn is_finite(&self) -> bool {
        self.users
            .data
            .iter()
            .chain(&self.items.data)
            .all(|v| v.is_finite())
    }

    /// Dense copies of the user and item gradients.
    pub fn to_dense(&self, n_users: usize, n_items: usize) -> (Array2<F>, Array2<F>) {
        let mut gu = Array2::zeros((n_users, self.dim));
        let mut gi = Array2::zeros((n_items, self.dim));
        for (r, g) in self.user_rows() {
            gu.row_mut(r).iter_mut().zip(g).for_each(|(a, &b)| *a = b);
        }
        for (r, g) in self.item_rows() {
            gi.row_mut(r).iter_mut().zip(g).for_each(|(a, &b)| *a = b);
        }
        (gu, gi)
    }

    /// `θ ← θ − lr·g` on the touched rows.
    pub fn apply(&self, model: &mut FactorModel<F>, lr: F) {
        for (r, g) in self.user_rows() {
            let mut row = model.users_mut().row_mut(r);
            row.iter_mut().zip(g).for_each(|(w, &gw)| *w = *w - lr * gw);
        }
        for (r, g) in self.item_rows() {
            let mut row = model.items_mut().row_mut(r);
            row.iter_mut().zip(g).for_each(|(x, &gx)| *x = *x - lr * gx);
        }
    }

    fn add_scaled(&mut self, user: bool, row: usize, src: ndarray::ArrayView1<'_, F>, scale: F) {
        let dim = self.dim;
        let acc = if user {
            &mut self.users
        } else {
            &mut self.items
        };
        let dst = acc.row_mut(row, dim);
        dst.iter_mut()
            .zip(src.iter())
            .for_each(|(d, &s)| *d = *d + scale * s);
    }
}

/// Pearson correlation; zero if either vector has zero variance.
pub fn pearson<F: Scalar>(a: &[F], b: &[F]) -> Result<F> {
    Ok(PearsonParts::new(a, b)?.rho)
}

/// `|pearson(A1, A2)|`, in `[0, 1]`.
pub fn correlation_penalty<F: Scalar>(a1: &[F], a2: &[F]) -> Result<F> {
    Ok(pearson(a1, a2)?.abs())
}

/// Centered vectors and sums needed for the correlation and its derivative.
struct PearsonParts<F> {
    ca: Vec<F>,
    cb: Vec<F>,
    saa: F,
    sbb: F,
    rho: F,
}

impl<F: Scalar> PearsonParts<F> {
    fn new(a: &[F], b: &[F]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(ModelError::LengthMismatch(a.len(), b.len()));
        }
        if a.len() < 2 {
            return Err(ModelError::TooFewPoints(a.len()));
        }
        let n = F::of(a.len() as f64);
        let ma = a.iter().copied().sum::<F>() / n;
        let mb = b.iter().copied().sum::<F>() / n;
        let ca: Vec<F> = a.iter().map(|&x| x - ma).collect();
        let cb: Vec<F> = b.iter().map(|&x| x - mb).collect();
        let saa: F = ca.iter().map(|&x| x * x).sum();
        let sbb: F = cb.iter().map(|&x| x * x).sum();
        let sab: F = ca.iter().zip(&cb).map(|(&x, &y)| x * y).sum();
        let rho = if saa > F::zero() && sbb > F::zero() {
            let r = sab / (saa * sbb).sqrt();
            r.max(-F::one()).min(F::one())
        } else {
            F::zero()
        };
        Ok(Self {
            ca,
            cb,
            saa,
            sbb,
            rho,
        })
    }

    /// `∂rho/∂a_b = cb_b/√(saa·sbb) − rho·ca_b/saa`; zero under the variance guard.
    fn d_rho_d_a(&self) -> Vec<F> {
        if !(self.saa > F::zero() && self.sbb > F::zero()) {
            return vec![F::zero(); self.ca.len()];
        }
        let norm = (self.saa * self.sbb).sqrt();
        self.ca
            .iter()
            .zip(&self.cb)
            .map(|(&ca, &cb)| cb / norm - self.rho * ca / self.saa)
            .collect()
    }
}

fn sign<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        F::one()
    } else if x < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}

/// Clamped negative log-likelihood of `p_target = σ(z)` and its derivative
/// with respect to `z`. The derivative is zero inside the clamp region.
fn neg_log_sigmoid<F: Scalar>(z: F) -> (F, F) {
    let eps = F::of(LOG_EPS);
    let p = sigmoid(z);
    if p < eps {
        (-eps.ln(), F::zero())
    } else if p > F::one() - eps {
        (-(F::one() - eps).ln(), F::zero())
    } else {
        (-p.ln(), p - F::one())
    }
}

fn sq_norm<F: Scalar>(row: ndarray::ArrayView1<'_, F>) -> F {
    row.dot(&row)
}

/// Loss, penalty and objective of a batch, plus the gradient when requested.
///
/// The penalty enters only when `lambda > 0` and the batch has at least two
/// examples; a single-example batch is optimized for accuracy alone.
pub fn evaluate_batch<F: Scalar>(
    model: &FactorModel<F>,
    batch: Batch<'_>,
    l2: F,
    lambda: F,
    with_gradient: bool,
) -> Result<(BatchResult<F>, Option<Gradient<F>>)> {
    let n = batch.len();
    if n == 0 {
        return Err(ModelError::TooFewPoints(0));
    }
    check_indices(model, batch)?;
    let nf = F::of(n as f64);

    // Per-example loss, its derivative w.r.t. the example's logit, popularity
    // and L2 contribution.
    let mut a1 = Vec::with_capacity(n);
    let mut dlogit = Vec::with_capacity(n);
    let mut a2 = Vec::with_capacity(n);
    let mut l2_sum = F::zero();
    match batch {
        Batch::Pointwise(exs) => {
            for e in exs {
                let s = model.score_unchecked(e.user, e.item);
                // BCE(σ(s), y) = −ln σ(s) for y = 1 and −ln σ(−s) for y = 0.
                let (loss, d) = if e.label {
                    neg_log_sigmoid(s)
                } else {
                    let (l, d) = neg_log_sigmoid(-s);
                    (l, -d)
                };
                a1.push(loss);
                dlogit.push(d);
                a2.push(F::of(e.item_pop));
                l2_sum = l2_sum + sq_norm(model.user(e.user)) + sq_norm(model.item(e.item));
            }
        }
        Batch::Pairwise(exs) => {
            for e in exs {
                let margin = model.score_unchecked(e.user, e.pos_item)
                    - model.score_unchecked(e.user, e.neg_item);
                let (loss, d) = neg_log_sigmoid(margin);
                a1.push(loss);
                dlogit.push(d);
                a2.push(F::of(e.pos_pop));
                l2_sum = l2_sum
                    + sq_norm(model.user(e.user))
                    + sq_norm(model.item(e.pos_item))
                    + sq_norm(model.item(e.neg_item));
            }
        }
    }

    let accuracy_loss = a1.iter().copied().sum::<F>() / nf + l2 * l2_sum / nf;
    let regularize = lambda > F::zero() && n >= 2;
    let acc_weight = if regularize {
        F::one() - lambda
    } else {
        F::one()
    };
    let (penalty, d_penalty) = if regularize {
        let parts = PearsonParts::new(&a1, &a2)?;
        let s = sign(parts.rho);
        let d: Vec<F> = parts.d_rho_d_a().into_iter().map(|g| s * g).collect();
        (parts.rho.abs(), Some(d))
    } else {
        (F::zero(), None)
    };
    let objective = acc_weight * accuracy_loss
        + if regularize {
            lambda * penalty
        } else {
            F::zero()
        };

    let result = BatchResult {
        per_example_loss: a1,
        per_example_pop: a2,
        accuracy_loss,
        penalty,
        objective,
    };
    if !with_gradient {
        return Ok((result, None));
    }

    let mut grad = Gradient::new(model.dim());
    let base = acc_weight / nf;
    let l2_scale = base * (l2 + l2);
    let weight = |b: usize| -> F {
        match &d_penalty {
            Some(d) => base + lambda * d[b],
            None => base,
        }
    };
    match batch {
        Batch::Pointwise(exs) => {
            for (b, e) in exs.iter().enumerate() {
                let g = weight(b) * dlogit[b];
                let (w, x) = (model.user(e.user), model.item(e.item));
                grad.add_scaled(true, e.user, x, g);
                grad.add_scaled(false, e.item, w, g);
                grad.add_scaled(true, e.user, w, l2_scale);
                grad.add_scaled(false, e.item, x, l2_scale);
            }
        }
        Batch::Pairwise(exs) => {
            for (b, e) in exs.iter().enumerate() {
                let g = weight(b) * dlogit[b];
                let w = model.user(e.user);
                let xi = model.item(e.pos_item);
                let xj = model.item(e.neg_item);
                grad.add_scaled(true, e.user, xi, g);
                grad.add_scaled(true, e.user, xj, -g);
                grad.add_scaled(false, e.pos_item, w, g);
                grad.add_scaled(false, e.neg_item, w, -g);
                grad.add_scaled(true, e.user, w, l2_scale);
                grad.add_scaled(false, e.pos_item, xi, l2_scale);
                grad.add_scaled(false, e.neg_item, xj, l2_scale);
            }
        }
    }
    Ok((result, Some(grad)))
}

fn check_indices<F: Scalar>(model: &FactorModel<F>, batch: Batch<'_>) -> Result<()> {
    let (nu, ni) = (model.n_users(), model.n_items());
    let user = |u: usize| {
        if u >= nu {
            Err(ModelError::IndexOutOfRange {
                what: "user",
                index: u,
                size: nu,
            })
        } else {
            Ok(())
        }
    };
    let item = |i: usize| {
        if i >= ni {
            Err(ModelError::IndexOutOfRange {
                what: "item",
                index: i,
                size: ni,
            })
        } else {
            Ok(())
        }
    };
    match batch {
        Batch::Pointwise(exs) => exs.iter().try_for_each(|e| {
            user(e.user)?;
            item(e.item)
        }),
        Batch::Pairwise(exs) => exs.iter().try_for_each(|e| {
            user(e.user)?;
            item(e.pos_item)?;
            item(e.neg_item)
        }),
    }
}

/// Point-wise batch loss with `λ = 0`; the penalty field still reports
/// `|pearson(A1, A2)|` for batches of two or more examples.
pub fn pointwise_loss<F: Scalar>(
    batch: &[PointwiseExample],
    model: &FactorModel<F>,
    l2: F,
) -> Result<BatchResult<F>> {
    unregularized(model, Batch::Pointwise(batch), l2)
}

/// Pair-wise (BPR) batch loss with `λ = 0`; see [`pointwise_loss`].
pub fn pairwise_loss<F: Scalar>(
    batch: &[PairwiseExample],
    model: &FactorModel<F>,
    l2: F,
) -> Result<BatchResult<F>> {
    unregularized(model, Batch::Pairwise(batch), l2)
}

fn unregularized<F: Scalar>(
    model: &FactorModel<F>,
    batch: Batch<'_>,
    l2: F,
) -> Result<BatchResult<F>> {
    let (mut r, _) = evaluate_batch(model, batch, l2, F::zero(), false)?;
    if r.per_example_loss.len() >= 2 {
        r.penalty = correlation_penalty(&r.per_example_loss, &r.per_example_pop)?;
    }
    Ok(r)
}
