//! Internal-mechanics diagnostics: pair-wise accuracy across popularity
//! buckets, and paired head/mid relevance samples.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;

use super::{MetricError, Result};
use crate::data::{Bucket, PopularityStats, SplitDataset};
use crate::model::FactorModel;
use crate::scalar::Scalar;
use crate::seed;

/// Bucket of the unobserved item in a triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum UnobservedTarget {
    Bucket(Bucket),
    Any,
}

impl fmt::Display for UnobservedTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnobservedTarget::Bucket(b) => b.fmt(f),
            UnobservedTarget::Any => f.write_str("any"),
        }
    }
}

/// Accuracy of one (observed bucket, unobserved target) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellAccuracy {
    /// Fraction of evaluated triplets with `score(u, i) > score(u, j)`.
    pub accuracy: f64,
    /// Triplets evaluated.
    pub evaluated: usize,
    /// Valid triplets in the cell.
    pub population: u128,
    /// True when every valid triplet was evaluated.
    pub exhaustive: bool,
}

/// Pair-wise accuracy over Head/Mid observed items against Head/Mid/any
/// unobserved items. `None` marks a cell without valid triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseAccuracyTable {
    pub cells: BTreeMap<(Bucket, UnobservedTarget), Option<CellAccuracy>>,
}

impl PairwiseAccuracyTable {
    pub fn get(&self, observed: Bucket, unobserved: UnobservedTarget) -> Option<f64> {
        self.cells
            .get(&(observed, unobserved))
            .copied()
            .flatten()
            .map(|c| c.accuracy)
    }

    /// TSV with columns `observed, unobserved, accuracy, evaluated, population`.
    pub fn render_tsv(&self) -> String {
        let mut s = String::from("observed\tunobserved\taccuracy\tevaluated\tpopulation\n");
        for ((o, t), cell) in &self.cells {
            match cell {
                Some(c) => {
                    let _ = writeln!(
                        s,
                        "{o}\t{t}\t{}\t{}\t{}",
                        c.accuracy, c.evaluated, c.population
                    );
                }
                None => {
                    let _ = writeln!(s, "{o}\t{t}\tabsent\t0\t0");
                }
            }
        }
        s
    }
}

pub const OBSERVED_BUCKETS: [Bucket; 2] = [Bucket::Head, Bucket::Mid];
pub const UNOBSERVED_TARGETS: [UnobservedTarget; 3] = [
    UnobservedTarget::Bucket(Bucket::Head),
    UnobservedTarget::Bucket(Bucket::Mid),
    UnobservedTarget::Any,
];

/// Estimates pair-wise accuracy per cell from `samples_per_cell` triplets
/// drawn uniformly from the cell's valid triplets, or from all of them when
/// the cell holds no more than `samples_per_cell`.
pub fn pairwise_accuracy_buckets<F: Scalar>(
    model: &FactorModel<F>,
    split: &SplitDataset,
    stats: &PopularityStats,
    samples_per_cell: usize,
    seed: u64,
) -> Result<PairwiseAccuracyTable> {
    let in_bucket = |b: Bucket| (0..split.n_items).filter(|&i| stats.bucket[i] == b).count();
    if in_bucket(Bucket::Head) == 0 || in_bucket(Bucket::Mid) == 0 {
        return Err(MetricError::Precondition(
            "head and mid buckets must both be non-empty".into(),
        ));
    }
    let mut rng = seed::rng(seed);
    let mut cells = BTreeMap::new();
    for obs in OBSERVED_BUCKETS {
        for target in UNOBSERVED_TARGETS {
            let cell = accuracy_cell(model, split, stats, obs, target, samples_per_cell, &mut rng);
            cells.insert((obs, target), cell);
        }
    }
    Ok(PairwiseAccuracyTable { cells })
}

fn accuracy_cell<F: Scalar>(
    model: &FactorModel<F>,
    split: &SplitDataset,
    stats: &PopularityStats,
    obs: Bucket,
    target: UnobservedTarget,
    samples: usize,
    rng: &mut seed::Rng,
) -> Option<CellAccuracy> {
    let targets: Vec<usize> = (0..split.n_items)
        .filter(|&j| match target {
            UnobservedTarget::Bucket(b) => stats.bucket[j] == b,
            UnobservedTarget::Any => true,
        })
        .collect();
    // Per user: observed items in `obs` and the number of unobserved targets.
    let per_user: Vec<(Vec<usize>, usize)> = (0..split.n_users)
        .map(|u| {
            let observed = split.train.items(u);
            let pos: Vec<usize> = observed
                .iter()
                .copied()
                .filter(|&i| stats.bucket[i] == obs)
                .collect();
            let free = targets
                .iter()
                .filter(|&&j| observed.binary_search(&j).is_err())
                .count();
            (pos, free)
        })
        .collect();
    let weights: Vec<u128> = per_user
        .iter()
        .map(|(pos, free)| pos.len() as u128 * *free as u128)
        .collect();
    let population: u128 = weights.iter().sum();
    if population == 0 {
        return None;
    }
    let wins = |u: usize, i: usize, j: usize| {
        model.score_unchecked(u, i).f64() > model.score_unchecked(u, j).f64()
    };

    if population <= samples as u128 {
        let mut correct = 0usize;
        let mut total = 0usize;
        for (u, (pos, _)) in per_user.iter().enumerate() {
            let observed = split.train.items(u);
            for &i in pos {
                for &j in targets
                    .iter()
                    .filter(|j| observed.binary_search(j).is_err())
                {
                    total += 1;
                    correct += wins(u, i, j) as usize;
                }
            }
        }
        return Some(CellAccuracy {
            accuracy: correct as f64 / total as f64,
            evaluated: total,
            population,
            exhaustive: true,
        });
    }

    let users =
        WeightedIndex::new(weights.iter().map(|&w| w as f64)).expect("positive total weight");
    let mut correct = 0usize;
    for _ in 0..samples {
        let u = users.sample(rng);
        let (pos, _) = &per_user[u];
        let i = pos[rng.gen_range(0..pos.len())];
        let j = draw_unobserved(split, u, &targets, rng);
        correct += wins(u, i, j) as usize;
    }
    Some(CellAccuracy {
        accuracy: correct as f64 / samples as f64,
        evaluated: samples,
        population,
        exhaustive: false,
    })
}

fn draw_unobserved(
    split: &SplitDataset,
    u: usize,
    targets: &[usize],
    rng: &mut seed::Rng,
) -> usize {
    for _ in 0..crate::sampling::REJECTION_CAP {
        let j = targets[rng.gen_range(0..targets.len())];
        if !split.train.contains(u, j) {
            return j;
        }
    }
    let free: Vec<usize> = targets
        .iter()
        .copied()
        .filter(|&j| !split.train.contains(u, j))
        .collect();
    free[rng.gen_range(0..free.len())]
}

/// Aligned relevance scores of (observed head item, observed mid item) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceSample {
    pub users: Vec<usize>,
    pub head: Vec<f64>,
    pub mid: Vec<f64>,
}

impl RelevanceSample {
    /// Two-column TSV `head_score, mid_score`.
    pub fn render_tsv(&self) -> String {
        let mut s = String::from("head_score\tmid_score\n");
        for (h, m) in self.head.iter().zip(&self.mid) {
            let _ = writeln!(s, "{h}\t{m}");
        }
        s
    }
}

/// For every user holding both head and mid training items, scores
/// `pairs_per_user` random (head, mid) pairs drawn with replacement.
pub fn relevance_distribution_sample<F: Scalar>(
    model: &FactorModel<F>,
    split: &SplitDataset,
    stats: &PopularityStats,
    pairs_per_user: usize,
    seed: u64,
) -> Result<RelevanceSample> {
    let mut rng = seed::rng(seed);
    let mut out = RelevanceSample {
        users: Vec::new(),
        head: Vec::new(),
        mid: Vec::new(),
    };
    for u in 0..split.n_users {
        let pick = |b: Bucket| -> Vec<usize> {
            split
                .train
                .items(u)
                .iter()
                .copied()
                .filter(|&i| stats.bucket[i] == b)
                .collect()
        };
        let (heads, mids) = (pick(Bucket::Head), pick(Bucket::Mid));
        if heads.is_empty() || mids.is_empty() {
            continue;
        }
        for _ in 0..pairs_per_user {
            let h = heads[rng.gen_range(0..heads.len())];
            let m = mids[rng.gen_range(0..mids.len())];
            out.users.push(u);
            out.head.push(model.score_unchecked(u, h).f64());
            out.mid.push(model.score_unchecked(u, m).f64());
        }
    }
    if out.users.is_empty() {
        return Err(MetricError::Precondition(
            "no user has both observed head and observed mid items".into(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{compute_popularity, Relation};
    use ndarray::Array2;

    fn fixture() -> (SplitDataset, PopularityStats) {
        // counts: item0 = 4, item1 = 3, item2 = 2, item3 = 1, item4..5 = 1
        let pairs = [
            (0, 0),
            (1, 0),
            (2, 0),
            (3, 0),
            (0, 1),
            (1, 1),
            (2, 1),
            (0, 2),
            (3, 2),
            (1, 3),
            (2, 4),
            (3, 5),
        ];
        let split =
            SplitDataset::from_relations(Relation::from_pairs(4, 7, pairs), Relation::new(4, 7));
        let stats = compute_popularity(&split).unwrap();
        (split, stats)
    }

    #[test]
    fn equal_item_vectors_fail_every_cell() {
        let (split, stats) = fixture();
        let m = FactorModel::from_parts(Array2::<f64>::ones((4, 2)), Array2::<f64>::ones((7, 2)))
            .unwrap();
        let table = pairwise_accuracy_buckets(&m, &split, &stats, 1000, 0).unwrap();
        for cell in table.cells.values().flatten() {
            assert_eq!(cell.accuracy, 0.0);
        }
        assert!(table.render_tsv().starts_with("observed\tunobserved"));
    }

    #[test]
    fn sampled_cells_approach_exhaustive_values() {
        let (split, stats) = fixture();
        let m: FactorModel<f64> = FactorModel::init(4, 7, 3, 8).unwrap();
        let exact = pairwise_accuracy_buckets(&m, &split, &stats, usize::MAX, 0).unwrap();
        let sampled = pairwise_accuracy_buckets(&m, &split, &stats, 20_000, 1).unwrap();
        for (key, cell) in &exact.cells {
            match (cell, sampled.cells[key]) {
                (Some(a), Some(b)) => {
                    assert!(a.exhaustive);
                    assert!((a.accuracy - b.accuracy).abs() < 0.03, "{key:?}");
                }
                (None, None) => {}
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn needs_head_and_mid() {
        let split = SplitDataset::from_relations(
            Relation::from_pairs(2, 2, [(0, 0), (1, 0)]),
            Relation::new(2, 2),
        );
        let stats = compute_popularity(&split).unwrap();
        let m: FactorModel<f64> = FactorModel::init(2, 2, 2, 0).unwrap();
        assert!(pairwise_accuracy_buckets(&m, &split, &stats, 10, 0).is_err());
        assert!(relevance_distribution_sample(&m, &split, &stats, 3, 0).is_err());
    }

    #[test]
    fn dominant_head_vectors() {
        let (split, stats) = fixture();
        let mut items = Array2::<f64>::zeros((7, 3));
        let base = [0.2, 0.5, 0.9];
        for i in 0..7 {
            let scale = if stats.bucket[i] == Bucket::Head {
                2.0
            } else {
                1.0
            };
            for d in 0..3 {
                items[[i, d]] = scale * base[d];
            }
        }
        let m = FactorModel::from_parts(Array2::<f64>::from_elem((4, 3), 0.3), items).unwrap();
        let s = relevance_distribution_sample(&m, &split, &stats, 5, 2).unwrap();
        assert_eq!(s.head.len(), s.mid.len());
        assert_eq!(s.head.len(), s.users.len());
        assert!(s.head.iter().zip(&s.mid).all(|(h, m)| h >= m));
        assert_eq!(s.render_tsv().lines().count(), 1 + s.head.len());
    }

    #[test]
    fn sampled_scores_match_direct_calls() {
        let (split, stats) = fixture();
        let m: FactorModel<f64> = FactorModel::init(4, 7, 3, 3).unwrap();
        let s = relevance_distribution_sample(&m, &split, &stats, 4, 9).unwrap();
        for (k, &u) in s.users.iter().enumerate() {
            let heads: Vec<f64> = split
                .train
                .items(u)
                .iter()
                .filter(|&&i| stats.bucket[i] == Bucket::Head)
                .map(|&i| m.score(u, i).unwrap())
                .collect();
            let mids: Vec<f64> = split
                .train
                .items(u)
                .iter()
                .filter(|&&i| stats.bucket[i] == Bucket::Mid)
                .map(|&i| m.score(u, i).unwrap())
                .collect();
            assert!(heads.contains(&s.head[k]));
            assert!(mids.contains(&s.mid[k]));
        }
    }
}
