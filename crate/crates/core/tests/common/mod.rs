//! Brute-force reference implementations and random instance builders shared
//! by the integration tests. Everything here is written directly from the
//! metric definitions and deliberately avoids the library's own helpers.

#![allow(dead_code)]

use ndarray::Array2;
use popdebias::data::{Bucket, Relation, SplitDataset};
use popdebias::metrics::RecommendationRun;
use popdebias::FactorModel;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gini index through the mean absolute difference.
pub fn gini_mad(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sum: f64 = x.iter().sum();
    if sum == 0.0 {
        return 0.0;
    }
    let mut mad = 0.0;
    for a in x {
        for b in x {
            mad += (a - b).abs();
        }
    }
    mad / (2.0 * n * sum)
}

pub fn train_count(split: &SplitDataset, i: usize) -> usize {
    (0..split.n_users)
        .filter(|&u| split.train.contains(u, i))
        .count()
}

pub fn in_list(run: &RecommendationRun, u: usize, i: usize) -> bool {
    run.lists[u].iter().any(|p| p.0 == i)
}

pub fn isp(run: &RecommendationRun, split: &SplitDataset) -> f64 {
    let mut p = Vec::new();
    for i in 0..split.n_items {
        let eligible: Vec<usize> = (0..split.n_users)
            .filter(|&u| !split.train.contains(u, i))
            .collect();
        if eligible.is_empty() {
            continue;
        }
        let rec = eligible.iter().filter(|&&u| in_list(run, u, i)).count();
        p.push(rec as f64 / eligible.len() as f64);
    }
    1.0 - gini_mad(&p)
}

pub fn ieo(run: &RecommendationRun, test: &Relation) -> f64 {
    let mut tpr = Vec::new();
    for i in 0..test.n_items() {
        let holders: Vec<usize> = (0..test.n_users())
            .filter(|&u| test.contains(u, i))
            .collect();
        if holders.is_empty() {
            continue;
        }
        let hits = holders.iter().filter(|&&u| in_list(run, u, i)).count();
        tpr.push(hits as f64 / holders.len() as f64);
    }
    1.0 - gini_mad(&tpr)
}

/// `(ndcg, precision, recall)` averaged over users with test items.
pub fn accuracy(run: &RecommendationRun, test: &Relation) -> (f64, f64, f64) {
    let k = run.k;
    let (mut nd, mut pr, mut re, mut n) = (0.0, 0.0, 0.0, 0.0);
    for u in 0..test.n_users() {
        let rel: Vec<usize> = (0..test.n_items())
            .filter(|&i| test.contains(u, i))
            .collect();
        if rel.is_empty() {
            continue;
        }
        n += 1.0;
        let list: Vec<usize> = run.lists[u].iter().take(k).map(|p| p.0).collect();
        let gains: Vec<f64> = list
            .iter()
            .map(|i| if rel.contains(i) { 1.0 } else { 0.0 })
            .collect();
        let dcg: f64 = gains
            .iter()
            .enumerate()
            .map(|(r, g)| g / ((r as f64) + 2.0).log2())
            .sum();
        let ideal: f64 = (1..=k.min(rel.len()))
            .map(|r| 1.0 / ((r as f64) + 1.0).log2())
            .sum();
        let hits: f64 = gains.iter().sum();
        nd += dcg / ideal;
        pr += hits / k as f64;
        re += hits / rel.len() as f64;
    }
    (nd / n, pr / n, re / n)
}

pub fn novelty(run: &RecommendationRun, split: &SplitDataset) -> f64 {
    let mut acc = Vec::new();
    for l in &run.lists {
        for &(i, _) in l {
            acc.push(1.0 - train_count(split, i) as f64 / split.n_users as f64);
        }
    }
    acc.iter().sum::<f64>() / acc.len() as f64
}

pub fn coverage(run: &RecommendationRun, n_items: usize) -> f64 {
    (0..n_items)
        .filter(|&i| run.lists.iter().any(|l| l.iter().any(|p| p.0 == i)))
        .count() as f64
        / n_items as f64
}

/// Buckets by a cumulative scan over items sorted by count (descending,
/// index ascending on ties).
pub fn buckets(counts: &[usize]) -> Vec<Bucket> {
    let total: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut out = vec![Bucket::Tail; counts.len()];
    let mut before = 0usize;
    for i in order {
        let share = before as f64 / total as f64;
        out[i] = if share < 0.5 {
            Bucket::Head
        } else if share < 0.75 {
            Bucket::Mid
        } else {
            Bucket::Tail
        };
        before += counts[i];
    }
    out
}

/// Exhaustive pair-wise accuracy for one cell; `target = None` means any bucket.
#[allow(clippy::needless_range_loop)]
pub fn pairwise_cell(
    model: &FactorModel<f64>,
    split: &SplitDataset,
    bucket: &[Bucket],
    obs: Bucket,
    target: Option<Bucket>,
) -> Option<f64> {
    let (mut ok, mut total) = (0usize, 0usize);
    for u in 0..split.n_users {
        for i in 0..split.n_items {
            if !split.train.contains(u, i) || bucket[i] != obs {
                continue;
            }
            for j in 0..split.n_items {
                if split.train.contains(u, j) || target.is_some_and(|b| bucket[j] != b) {
                    continue;
                }
                let su: f64 = (0..model.dim())
                    .map(|d| model.users()[[u, d]] * model.items()[[i, d]])
                    .sum();
                let sj: f64 = (0..model.dim())
                    .map(|d| model.users()[[u, d]] * model.items()[[j, d]])
                    .sum();
                total += 1;
                ok += (su > sj) as usize;
            }
        }
    }
    (total > 0).then(|| ok as f64 / total as f64)
}

/// Random disjoint train/test relations with a skewed item law.
pub fn random_split(r: &mut ChaCha8Rng, n_users: usize, n_items: usize) -> SplitDataset {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for u in 0..n_users {
        for i in 0..n_items {
            let p = 0.9 / (1.0 + i as f64 * 0.5);
            let x: f64 = r.gen();
            if x < p {
                train.push((u, i));
            } else if x < p + 0.15 {
                test.push((u, i));
            }
        }
    }
    SplitDataset::from_relations(
        Relation::from_pairs(n_users, n_items, train),
        Relation::from_pairs(n_users, n_items, test),
    )
}

/// Up to `k` random unobserved items per user, with descending placeholder scores.
pub fn random_run(r: &mut ChaCha8Rng, split: &SplitDataset, k: usize) -> RecommendationRun {
    let lists = (0..split.n_users)
        .map(|u| {
            let mut free: Vec<usize> = (0..split.n_items)
                .filter(|&i| !split.train.contains(u, i))
                .collect();
            free.shuffle(r);
            free.truncate(k);
            free.iter()
                .enumerate()
                .map(|(p, &i)| (i, (k - p) as f64))
                .collect()
        })
        .collect();
    RecommendationRun::new(k, lists)
}

pub fn random_model(
    r: &mut ChaCha8Rng,
    n_users: usize,
    n_items: usize,
    dim: usize,
    scale: f64,
) -> FactorModel<f64> {
    let users = Array2::from_shape_fn((n_users, dim), |_| r.gen_range(-scale..scale));
    let items = Array2::from_shape_fn((n_items, dim), |_| r.gen_range(-scale..scale));
    FactorModel::from_parts(users, items).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
