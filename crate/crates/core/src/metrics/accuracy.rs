use super::{MetricError, RecommendationRun, Result};
use crate::data::{PopularityStats, Relation};

/// User-averaged binary-relevance accuracy at the run's cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingAccuracy {
    pub ndcg: f64,
    pub precision: f64,
    pub recall: f64,
    /// Users with at least one test item.
    pub users: usize,
}

/// NDCG with `log2(rank + 1)` discounts, precision = hits / k, and
/// recall = hits / |test_u|, averaged over users with test items.
pub fn ranking_accuracy(run: &RecommendationRun, test: &Relation) -> Result<RankingAccuracy> {
    if run.n_users() != test.n_users() {
        return Err(MetricError::UserMismatch {
            run: run.n_users(),
            split: test.n_users(),
        });
    }
    let k = run.k;
    let (mut ndcg, mut precision, mut recall) = (0.0, 0.0, 0.0);
    let mut users = 0usize;
    for u in 0..run.n_users() {
        let relevant = test.items(u);
        if relevant.is_empty() {
            continue;
        }
        users += 1;
        let mut dcg = 0.0;
        let mut hits = 0usize;
        for (rank, i) in run.items(u).take(k).enumerate() {
            if relevant.binary_search(&i).is_ok() {
                hits += 1;
                dcg += 1.0 / ((rank + 2) as f64).log2();
            }
        }
        let idcg: f64 = (0..k.min(relevant.len()))
            .map(|r| 1.0 / ((r + 2) as f64).log2())
            .sum();
        ndcg += dcg / idcg;
        precision += hits as f64 / k as f64;
        recall += hits as f64 / relevant.len() as f64;
    }
    if users == 0 {
        return Err(MetricError::EmptyTest);
    }
    let n = users as f64;
    Ok(RankingAccuracy {
        ndcg: ndcg / n,
        precision: precision / n,
        recall: recall / n,
        users,
    })
}

/// Mean of `1 − pop(i)` over every filled recommendation slot; 0 for an empty run.
pub fn novelty(run: &RecommendationRun, stats: &PopularityStats) -> f64 {
    let mut sum = 0.0;
    let mut slots = 0usize;
    for u in 0..run.n_users() {
        for i in run.items(u) {
            sum += 1.0 - stats.pop[i];
            slots += 1;
        }
    }
    if slots == 0 {
        0.0
    } else {
        sum / slots as f64
    }
}

/// Fraction of the catalog appearing in at least one list.
pub fn coverage(run: &RecommendationRun, n_items: usize) -> f64 {
    let mut seen = vec![false; n_items];
    for u in 0..run.n_users() {
        for i in run.items(u) {
            seen[i] = true;
        }
    }
    seen.iter().filter(|&&s| s).count() as f64 / n_items as f64
}
