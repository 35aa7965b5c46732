//! Post-hoc re-rankers that trade relevance for popularity diversity.
//!
//! Items are split into two categories, Head and the rest (Mid ∪ Tail). Scores
//! are min-max normalized per user before mixing; a user whose candidate
//! scores are all equal gets a normalized score of 1 everywhere.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::data::{Bucket, PopularityStats, SplitDataset};
use crate::metrics::RecommendationRun;
use crate::model::{recommend_topk, FactorModel, ModelError};
use crate::scalar::Scalar;

/// Default candidate pool size per user.
pub const DEFAULT_CANDIDATES: usize = 100;

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("strength must lie in [0, 1], got {0}")]
    InvalidStrength(f64),
    #[error("profile ratios cover {0} users, candidates cover {1}")]
    ProfileLength(usize, usize),
    #[error("candidate item {item} is outside the popularity table ({n_items} items)")]
    UnknownItem { item: usize, n_items: usize },
    #[error("unknown re-ranker `{0}` (expected pop-weighted, binary-xquad or smooth-xquad)")]
    UnknownMethod(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T, E = RerankError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PopWeighted,
    BinaryXquad,
    SmoothXquad,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::PopWeighted => "pop-weighted",
            Method::BinaryXquad => "binary-xquad",
            Method::SmoothXquad => "smooth-xquad",
        })
    }
}

impl FromStr for Method {
    type Err = RerankError;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").to_ascii_lowercase().as_str() {
            "pop-weighted" => Ok(Method::PopWeighted),
            "binary-xquad" => Ok(Method::BinaryXquad),
            "smooth-xquad" => Ok(Method::SmoothXquad),
            _ => Err(RerankError::UnknownMethod(s.to_string())),
        }
    }
}

/// Per-user candidate lists `(item, relevance)`, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    pub lists: Vec<Vec<(usize, f64)>>,
}

impl ScoredCandidates {
    pub fn from_run(run: &RecommendationRun) -> Self {
        Self {
            lists: run.lists.clone(),
        }
    }

    /// Top-`pool` unobserved items per user from a trained model.
    pub fn from_model<F: Scalar>(
        model: &FactorModel<F>,
        split: &SplitDataset,
        pool: usize,
    ) -> Result<Self> {
        Ok(Self::from_run(&recommend_topk(model, split, pool)?))
    }

    fn check(&self, stats: &PopularityStats, strength: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(RerankError::InvalidStrength(strength));
        }
        let n_items = stats.n_items();
        for l in &self.lists {
            if let Some(&(item, _)) = l.iter().find(|p| p.0 >= n_items) {
                return Err(RerankError::UnknownItem { item, n_items });
            }
        }
        Ok(())
    }
}

/// Min-max normalization to `[0, 1]`; a constant list maps to 1.
fn normalize(list: &[(usize, f64)]) -> Vec<f64> {
    let lo = list.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = list.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![1.0; list.len()];
    }
    list.iter().map(|p| (p.1 - lo) / (hi - lo)).collect()
}

fn is_head(stats: &PopularityStats, item: usize) -> bool {
    stats.bucket[item] == Bucket::Head
}

fn finish(
    k: usize,
    lists: Vec<Vec<(usize, f64)>>,
    method: Method,
    strength: f64,
) -> RecommendationRun {
    let mut run = RecommendationRun::new(k, lists);
    run.provenance.insert("reranker".into(), method.to_string());
    run.provenance
        .insert("strength".into(), strength.to_string());
    run
}

/// `(1 − s)·norm + s·norm·(1 − pop)`, top-`k`; ties keep candidate order.
/// Output scores are the adjusted scores.
pub fn pop_weighted_rerank(
    cands: &ScoredCandidates,
    stats: &PopularityStats,
    strength: f64,
    k: usize,
) -> Result<RecommendationRun> {
    cands.check(stats, strength)?;
    let lists = cands
        .lists
        .iter()
        .map(|list| {
            let norm = normalize(list);
            let mut adjusted: Vec<(usize, f64)> = list
                .iter()
                .zip(norm)
                .map(|(&(i, _), n)| {
                    (
                        i,
                        (1.0 - strength) * n + strength * n * (1.0 - stats.pop[i]),
                    )
                })
                .collect();
            // stable: equal adjusted scores keep their candidate order
            adjusted.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores"));
            adjusted.truncate(k);
            adjusted
        })
        .collect();
    Ok(finish(k, lists, Method::PopWeighted, strength))
}

/// Category likelihoods `(P(head|u), P(rest|u))` and damping rule.
#[derive(Clone, Copy)]
enum Damping {
    /// A category stops earning credit once any item from it is selected.
    Binary,
    /// Credit shrinks with the share of already-selected items from the category.
    Smooth,
}

fn xquad_list(
    list: &[(usize, f64)],
    stats: &PopularityStats,
    strength: f64,
    k: usize,
    p_rest: f64,
    damping: Damping,
) -> Vec<(usize, f64)> {
    let norm = normalize(list);
    let p = [1.0 - p_rest, p_rest];
    let category = |i: usize| if is_head(stats, i) { 0 } else { 1 };
    let mut picked = [0usize; 2];
    let mut taken = vec![false; list.len()];
    let mut out = Vec::with_capacity(k.min(list.len()));
    for step in 0..k.min(list.len()) {
        let mut best: Option<(usize, f64)> = None;
        for (pos, &(item, _)) in list.iter().enumerate() {
            if taken[pos] {
                continue;
            }
            let c = category(item);
            let not_covered = match damping {
                Damping::Binary => {
                    if picked[c] == 0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Damping::Smooth => {
                    if step == 0 {
                        1.0
                    } else {
                        1.0 - picked[c] as f64 / step as f64
                    }
                }
            };
            let utility = (1.0 - strength) * norm[pos] + strength * p[c] * not_covered;
            if best.is_none_or(|(_, u)| utility > u) {
                best = Some((pos, utility));
            }
        }
        let (pos, utility) = best.expect("a candidate remains");
        taken[pos] = true;
        picked[category(list[pos].0)] += 1;
        out.push((list[pos].0, utility));
    }
    out
}

/// Greedy xQuAD with binary coverage and uniform category likelihoods.
/// Output scores are the marginal utilities at selection time.
pub fn binary_xquad(
    cands: &ScoredCandidates,
    stats: &PopularityStats,
    strength: f64,
    k: usize,
) -> Result<RecommendationRun> {
    cands.check(stats, strength)?;
    let lists = cands
        .lists
        .iter()
        .map(|l| xquad_list(l, stats, strength, k, 0.5, Damping::Binary))
        .collect();
    Ok(finish(k, lists, Method::BinaryXquad, strength))
}

/// Greedy xQuAD whose likelihood of the non-head category is the user's
/// profile ratio and whose coverage term decays with the selected share.
pub fn smooth_xquad(
    cands: &ScoredCandidates,
    stats: &PopularityStats,
    profile_ratio: &[f64],
    strength: f64,
    k: usize,
) -> Result<RecommendationRun> {
    cands.check(stats, strength)?;
    if profile_ratio.len() != cands.lists.len() {
        return Err(RerankError::ProfileLength(
            profile_ratio.len(),
            cands.lists.len(),
        ));
    }
    let lists = cands
        .lists
        .iter()
        .zip(profile_ratio)
        .map(|(l, &r)| xquad_list(l, stats, strength, k, r, Damping::Smooth))
        .collect();
    Ok(finish(k, lists, Method::SmoothXquad, strength))
}

/// Per-user share of Mid ∪ Tail items in the training profile; 0.5 when empty.
pub fn profile_ratios(split: &SplitDataset, stats: &PopularityStats) -> Vec<f64> {
    (0..split.n_users)
        .map(|u| {
            let items = split.train.items(u);
            if items.is_empty() {
                0.5
            } else {
                items.iter().filter(|&&i| !is_head(stats, i)).count() as f64 / items.len() as f64
            }
        })
        .collect()
}

/// Dispatches to one of the re-rankers.
pub fn rerank(
    method: Method,
    cands: &ScoredCandidates,
    stats: &PopularityStats,
    profile_ratio: &[f64],
    strength: f64,
    k: usize,
) -> Result<RecommendationRun> {
    match method {
        Method::PopWeighted => pop_weighted_rerank(cands, stats, strength, k),
        Method::BinaryXquad => binary_xquad(cands, stats, strength, k),
        Method::SmoothXquad => smooth_xquad(cands, stats, profile_ratio, strength, k),
    }
}
