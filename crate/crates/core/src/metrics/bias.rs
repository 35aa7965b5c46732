use super::{MetricError, RecommendationRun, Result};
use crate::data::{Relation, SplitDataset};
use crate::scalar::Scalar;

/// Gini index of non-negative values.
///
/// With `x` sorted ascending and 1-based ranks `r`,
/// `G = Σ (2r − n − 1)·x_r / (n·Σx)`; an all-zero vector has `G = 0`.
pub fn gini<F: Scalar>(values: &[F]) -> Result<F> {
    if values.is_empty() {
        return Err(MetricError::EmptyVector);
    }
    if let Some((index, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= F::zero())) {
        return Err(MetricError::NegativeValue {
            index,
            value: v.f64(),
        });
    }
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).expect("no NaN after the sign check"));
    let total: F = x.iter().copied().sum();
    if total == F::zero() {
        return Ok(F::zero());
    }
    let n = x.len() as f64;
    let weighted: F = x
        .iter()
        .enumerate()
        .map(|(r, &v)| F::of(2.0 * (r + 1) as f64 - n - 1.0) * v)
        .sum();
    Ok(weighted / (F::of(n) * total))
}

/// Per-item probability of appearing in the top-k of users who can receive it.
#[derive(Debug, Clone, PartialEq)]
pub struct Exposure {
    /// Users with the item in their list.
    pub recommended: Vec<usize>,
    /// Users with no training interaction with the item.
    pub eligible: Vec<usize>,
    /// `recommended / eligible`, or 0 when no user is eligible.
    pub p: Vec<f64>,
}

impl Exposure {
    /// Items no user can receive; excluded from ISP.
    pub fn flagged(&self) -> Vec<usize> {
        (0..self.eligible.len())
            .filter(|&i| self.eligible[i] == 0)
            .collect()
    }

    /// Probabilities of items with at least one eligible user.
    pub fn defined(&self) -> Vec<(usize, f64)> {
        (0..self.p.len())
            .filter(|&i| self.eligible[i] > 0)
            .map(|i| (i, self.p[i]))
            .collect()
    }
}

fn check_users(run: &RecommendationRun, n_users: usize) -> Result<()> {
    if run.n_users() != n_users {
        return Err(MetricError::UserMismatch {
            run: run.n_users(),
            split: n_users,
        });
    }
    Ok(())
}

pub fn exposure_probability(run: &RecommendationRun, split: &SplitDataset) -> Result<Exposure> {
    check_users(run, split.n_users)?;
    let n_items = split.n_items;
    let mut recommended = vec![0usize; n_items];
    for u in 0..run.n_users() {
        for i in run.items(u) {
            recommended[i] += 1;
        }
    }
    let observed = split.train.item_counts();
    let eligible: Vec<usize> = observed.iter().map(|&c| split.n_users - c).collect();
    let p = recommended
        .iter()
        .zip(&eligible)
        .map(|(&r, &e)| if e == 0 { 0.0 } else { r as f64 / e as f64 })
        .collect();
    Ok(Exposure {
        recommended,
        eligible,
        p,
    })
}

/// `1 − gini` of the exposure probabilities of items in `items` that have
/// at least one eligible user.
pub fn isp_over(exposure: &Exposure, items: impl IntoIterator<Item = usize>) -> Result<f64> {
    let p: Vec<f64> = items
        .into_iter()
        .filter(|&i| exposure.eligible[i] > 0)
        .map(|i| exposure.p[i])
        .collect();
    Ok(1.0 - gini(&p)?)
}

/// Item statistical parity over all recommendable items.
pub fn isp(run: &RecommendationRun, split: &SplitDataset) -> Result<f64> {
    let e = exposure_probability(run, split)?;
    isp_over(&e, 0..split.n_items)
}

/// Per-item hit rate among users holding the item in `test`; items without
/// test support are absent from the output.
pub fn true_positive_rate(run: &RecommendationRun, test: &Relation) -> Result<Vec<(usize, f64)>> {
    check_users(run, test.n_users())?;
    let support = test.item_counts();
    let mut hits = vec![0usize; test.n_items()];
    for u in 0..run.n_users() {
        for i in run.items(u) {
            if test.contains(u, i) {
                hits[i] += 1;
            }
        }
    }
    Ok((0..test.n_items())
        .filter(|&i| support[i] > 0)
        .map(|i| (i, hits[i] as f64 / support[i] as f64))
        .collect())
}

/// Item equal opportunity: `1 − gini` of the per-item true positive rates.
pub fn ieo(run: &RecommendationRun, test: &Relation) -> Result<f64> {
    let tpr: Vec<f64> = true_positive_rate(run, test)?
        .into_iter()
        .map(|p| p.1)
        .collect();
    if tpr.is_empty() {
        return Err(MetricError::EmptyTest);
    }
    Ok(1.0 - gini(&tpr)?)
}
