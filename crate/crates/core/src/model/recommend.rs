use std::cmp::Ordering;

use rand::seq::index;
use rayon::prelude::*;

use super::{FactorModel, ModelError, Result};
use crate::data::{PopularityStats, SplitDataset};
use crate::metrics::RecommendationRun;
use crate::scalar::Scalar;
use crate::seed;

/// Score descending, item index ascending.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// Top-`k` of `scores` excluding the sorted `exclude` indices.
pub fn top_k_unobserved(scores: &[f64], exclude: &[usize], k: usize) -> Vec<(usize, f64)> {
    let mut cands: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| exclude.binary_search(i).is_err())
        .map(|(i, &s)| (i, s))
        .collect();
    if cands.len() > k {
        cands.select_nth_unstable_by(k, rank_order);
        cands.truncate(k);
    }
    cands.sort_by(rank_order);
    cands
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(ModelError::InvalidConfig("cutoff k must be ≥ 1".into()));
    }
    Ok(())
}

fn finish(k: usize, lists: Vec<Vec<(usize, f64)>>, name: &str) -> RecommendationRun {
    let mut run = RecommendationRun::new(k, lists);
    run.provenance.insert("recommender".into(), name.into());
    if !run.short_lists.is_empty() {
        log::info!(
            "{}: {} users received fewer than {k} items",
            name,
            run.short_lists.len()
        );
    }
    run
}

/// Per-user top-`k` unobserved items by predicted relevance.
///
/// Users are scored in parallel; the output is ordered by user index.
pub fn recommend_topk<F: Scalar>(
    model: &FactorModel<F>,
    split: &SplitDataset,
    k: usize,
) -> Result<RecommendationRun> {
    check_k(k)?;
    if model.n_users() != split.n_users || model.n_items() != split.n_items {
        return Err(ModelError::Shape(format!(
            "model is {}×{}, split is {}×{}",
            model.n_users(),
            model.n_items(),
            split.n_users,
            split.n_items
        )));
    }
    let lists: Vec<Vec<(usize, f64)>> = (0..split.n_users)
        .into_par_iter()
        .map(|u| {
            let scores: Vec<f64> = model.user_scores(u).into_iter().map(Scalar::f64).collect();
            top_k_unobserved(&scores, split.train.items(u), k)
        })
        .collect();
    Ok(finish(k, lists, "model"))
}

/// `k` distinct unobserved items per user, uniformly at random.
///
/// Scores are descending placeholders (`k`, `k−1`, …) so the list order is
/// explicit in serialized runs.
pub fn baseline_random(split: &SplitDataset, k: usize, seed: u64) -> Result<RecommendationRun> {
    check_k(k)?;
    let mut rng = seed::rng(seed);
    let lists = (0..split.n_users)
        .map(|u| {
            let observed = split.train.items(u);
            let free: Vec<usize> = (0..split.n_items)
                .filter(|i| observed.binary_search(i).is_err())
                .collect();
            let take = k.min(free.len());
            index::sample(&mut rng, free.len(), take)
                .into_iter()
                .enumerate()
                .map(|(pos, idx)| (free[idx], (take - pos) as f64))
                .collect()
        })
        .collect();
    Ok(finish(k, lists, "random"))
}

/// The `k` most popular unobserved items per user; scores are training counts.
pub fn baseline_mostpop(
    split: &SplitDataset,
    stats: &PopularityStats,
    k: usize,
) -> Result<RecommendationRun> {
    check_k(k)?;
    let counts: Vec<f64> = stats.count.iter().map(|&c| c as f64).collect();
    let lists = (0..split.n_users)
        .map(|u| top_k_unobserved(&counts, split.train.items(u), k))
        .collect();
    Ok(finish(k, lists, "mostpop"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{compute_popularity, Relation};
    use ndarray::Array2;

    fn split_5x10() -> SplitDataset {
        let pairs = [
            (0, 0),
            (0, 3),
            (1, 1),
            (2, 2),
            (2, 9),
            (3, 0),
            (3, 1),
            (3, 2),
            (4, 7),
        ];
        SplitDataset::from_relations(Relation::from_pairs(5, 10, pairs), Relation::new(5, 10))
    }

    #[test]
    fn argmax_item_for_everyone_who_has_not_seen_it() {
        let split = split_5x10();
        let users = Array2::<f64>::ones((5, 1));
        let mut items = Array2::<f64>::zeros((10, 1));
        items[[2, 0]] = 5.0;
        let m = FactorModel::from_parts(users, items).unwrap();
        let run = recommend_topk(&m, &split, 1).unwrap();
        for u in 0..5 {
            let first_free = (0..10).find(|&i| !split.train.contains(u, i)).unwrap();
            let expect = if split.train.contains(u, 2) {
                first_free
            } else {
                2
            };
            assert_eq!(run.lists[u][0].0, expect, "user {u}");
        }
    }

    #[test]
    fn matches_full_sort_oracle() {
        let split = split_5x10();
        let m: FactorModel<f64> = FactorModel::init(5, 10, 3, 4).unwrap();
        for k in 1..=10 {
            let run = recommend_topk(&m, &split, k).unwrap();
            for u in 0..5 {
                let mut all: Vec<(usize, f64)> = (0..10)
                    .filter(|&i| !split.train.contains(u, i))
                    .map(|i| (i, m.score(u, i).unwrap()))
                    .collect();
                all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                all.truncate(k);
                assert_eq!(run.lists[u], all);
            }
        }
    }

    #[test]
    fn ties_break_by_index_and_short_lists_are_flagged() {
        let split = split_5x10();
        let m = FactorModel::from_parts(Array2::<f64>::ones((5, 2)), Array2::<f64>::ones((10, 2)))
            .unwrap();
        let run = recommend_topk(&m, &split, 9).unwrap();
        let items: Vec<usize> = run.lists[1].iter().map(|p| p.0).collect();
        assert_eq!(items, vec![0, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(run.short_lists, vec![0, 2, 3]);
        assert!(recommend_topk(&m, &split, 0).is_err());
    }

    #[test]
    fn random_baseline_excludes_observed_and_is_seeded() {
        let split = split_5x10();
        let a = baseline_random(&split, 4, 3).unwrap();
        let b = baseline_random(&split, 4, 3).unwrap();
        assert_eq!(a.lists, b.lists);
        for (u, list) in a.lists.iter().enumerate() {
            assert_eq!(list.len(), 4);
            let mut items: Vec<usize> = list.iter().map(|p| p.0).collect();
            assert!(items.iter().all(|&i| !split.train.contains(u, i)));
            items.sort();
            items.dedup();
            assert_eq!(items.len(), 4);
        }
    }

    #[test]
    fn random_baseline_is_uniform() {
        // One user, nothing observed, k = 1: each of 10 items should be drawn
        // ~1000 times in 10_000 runs. Chi-square with 9 dof; 99.9% quantile ≈ 27.9.
        let split = SplitDataset::from_relations(
            Relation::from_pairs(1, 10, [(0, 0)]),
            Relation::new(1, 10),
        );
        let mut freq = [0usize; 10];
        let big =
            SplitDataset::from_relations(Relation::new(10_000, 10), Relation::new(10_000, 10));
        let run = baseline_random(&big, 1, 17).unwrap();
        for l in &run.lists {
            freq[l[0].0] += 1;
        }
        let expected = 1000.0;
        let chi2: f64 = freq
            .iter()
            .map(|&f| (f as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 27.9, "chi2 = {chi2}, freq = {freq:?}");
        let run = baseline_random(&split, 3, 1).unwrap();
        assert!(run.lists[0].iter().all(|p| p.0 != 0));
    }

    #[test]
    fn mostpop_examples() {
        let split = split_5x10();
        let stats = compute_popularity(&split).unwrap();
        let run = baseline_mostpop(&split, &stats, 3).unwrap();
        // counts: 0→2, 1→2, 2→2, 3→1, 7→1, 9→1
        let items = |u: usize| run.lists[u].iter().map(|p| p.0).collect::<Vec<_>>();
        assert_eq!(items(1), vec![0, 2, 3]);
        assert_eq!(items(3), vec![3, 7, 9]);
        assert_eq!(items(4), vec![0, 1, 2]);

        let empty_user = SplitDataset::from_relations(
            Relation::from_pairs(2, 4, [(0, 2), (0, 3)]),
            Relation::new(2, 4),
        );
        let stats = compute_popularity(&empty_user).unwrap();
        let run = baseline_mostpop(&empty_user, &stats, 2).unwrap();
        assert_eq!(
            run.lists[1].iter().map(|p| p.0).collect::<Vec<_>>(),
            vec![2, 3]
        );
    }
}
