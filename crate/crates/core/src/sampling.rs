//! Per-epoch training-example mining.
//!
//! Two strategies are provided: uniform negatives, and popularity-balanced
//! negatives where half of the negatives for an observed item `i` are less
//! popular than `i` and half are more popular. Popularity comparisons use raw
//! training counts with strict inequality; equal-count items sit on neither side.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use thiserror::Error;

use crate::data::{PopularityStats, SplitDataset};
use crate::seed::{self, Rng};

/// Draws per slot before falling back to enumerating the candidate side.
pub const REJECTION_CAP: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplingError {
    #[error("negatives per positive must be ≥ 1")]
    ZeroNegatives,
    #[error("balanced sampling needs an even t ≥ 2, got {0}")]
    OddBalancedT(usize),
    #[error("popularity stats cover {stats} items but the split has {split}")]
    ShapeMismatch { stats: usize, split: usize },
}

/// Loss family the examples are mined for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Pointwise,
    Pairwise,
}

/// Negative-mining strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Standard,
    Balanced,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Pointwise => "pointwise",
            Objective::Pairwise => "pairwise",
        })
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pointwise" | "point-wise" => Ok(Objective::Pointwise),
            "pairwise" | "pair-wise" | "bpr" => Ok(Objective::Pairwise),
            _ => Err(format!("unknown objective `{s}`")),
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Standard => "standard",
            SamplerKind::Balanced => "balanced",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "standard" | "uniform" => Ok(SamplerKind::Standard),
            "balanced" => Ok(SamplerKind::Balanced),
            _ => Err(format!("unknown sampler `{s}`")),
        }
    }
}

/// A labeled (user, item) pair for the logistic loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseExample {
    pub user: usize,
    pub item: usize,
    pub label: bool,
    /// Normalized popularity of `item`.
    pub item_pop: f64,
    /// Observed item this example was mined for; equals `item` for positives.
    pub anchor: usize,
}

/// A (user, observed, unobserved) triplet for the BPR loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseExample {
    pub user: usize,
    pub pos_item: usize,
    pub neg_item: usize,
    /// Normalized popularity of `pos_item`.
    pub pos_pop: f64,
}

/// One epoch of mined examples.
#[derive(Debug, Clone, PartialEq)]
pub enum Examples {
    Pointwise(Vec<PointwiseExample>),
    Pairwise(Vec<PairwiseExample>),
}

impl Examples {
    pub fn len(&self) -> usize {
        match self {
            Examples::Pointwise(v) => v.len(),
            Examples::Pairwise(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Audit dump with columns `user, pos, neg, pos_count, neg_count`.
    ///
    /// Point-wise positives carry no negative and are omitted; point-wise
    /// negatives are listed against the observed item they were mined for.
    pub fn render_tsv(&self, stats: &PopularityStats) -> String {
        let mut s = String::from("user\tpos\tneg\tpos_count\tneg_count\n");
        let mut row = |u: usize, p: usize, n: usize| {
            let _ = writeln!(s, "{u}\t{p}\t{n}\t{}\t{}", stats.count[p], stats.count[n]);
        };
        match self {
            Examples::Pairwise(v) => v.iter().for_each(|e| row(e.user, e.pos_item, e.neg_item)),
            Examples::Pointwise(v) => v
                .iter()
                .filter(|e| !e.label)
                .for_each(|e| row(e.user, e.anchor, e.item)),
        }
        s
    }
}

/// Re-mines training examples every epoch from a fixed split.
pub struct Sampler<'a> {
    split: &'a SplitDataset,
    stats: &'a PopularityStats,
    kind: SamplerKind,
    objective: Objective,
    t: usize,
    rng: Rng,
    /// Items by ascending count, index ascending on ties.
    by_count: Vec<usize>,
    /// Per item: number of items with strictly smaller count.
    less_end: Vec<usize>,
    /// Per item: offset in `by_count` of the first strictly larger count.
    more_start: Vec<usize>,
    /// Per user: ascending counts of the user's observed items.
    observed_counts: Vec<Vec<usize>>,
}

impl<'a> Sampler<'a> {
    pub fn new(
        split: &'a SplitDataset,
        stats: &'a PopularityStats,
        kind: SamplerKind,
        objective: Objective,
        t: usize,
        seed: u64,
    ) -> Result<Self, SamplingError> {
        if t == 0 {
            return Err(SamplingError::ZeroNegatives);
        }
        if kind == SamplerKind::Balanced && !t.is_multiple_of(2) {
            return Err(SamplingError::OddBalancedT(t));
        }
        if stats.n_items() != split.n_items {
            return Err(SamplingError::ShapeMismatch {
                stats: stats.n_items(),
                split: split.n_items,
            });
        }
        let count = &stats.count;
        let mut by_count: Vec<usize> = (0..split.n_items).collect();
        by_count.sort_by_key(|&i| (count[i], i));
        let sorted: Vec<usize> = by_count.iter().map(|&i| count[i]).collect();
        let less_end = count
            .iter()
            .map(|&c| sorted.partition_point(|&x| x < c))
            .collect();
        let more_start = count
            .iter()
            .map(|&c| sorted.partition_point(|&x| x <= c))
            .collect();
        let observed_counts = (0..split.n_users)
            .map(|u| {
                let mut v: Vec<usize> = split.train.items(u).iter().map(|&i| count[i]).collect();
                v.sort_unstable();
                v
            })
            .collect();
        Ok(Self {
            split,
            stats,
            kind,
            objective,
            t,
            rng: seed::rng(seed),
            by_count,
            less_end,
            more_start,
            observed_counts,
        })
    }

    /// Mines and shuffles one epoch of examples. Successive calls continue the
    /// same random stream.
    pub fn epoch(&mut self) -> Examples {
        let mut pointwise = Vec::new();
        let mut pairwise = Vec::new();
        let mut negs = Vec::with_capacity(self.t);
        let mut skipped = 0usize;
        let n_items = self.split.n_items;

        for u in 0..self.split.n_users {
            let observed = self.split.train.items(u);
            if observed.is_empty() {
                continue;
            }
            if observed.len() >= n_items {
                skipped += 1;
                continue;
            }
            for &i in observed {
                negs.clear();
                match self.kind {
                    SamplerKind::Standard => {
                        for _ in 0..self.t {
                            negs.push(self.uniform_negative(u));
                        }
                    }
                    SamplerKind::Balanced => self.balanced_negatives(u, i, &mut negs),
                }
                let pos_pop = self.stats.pop[i];
                match self.objective {
                    Objective::Pairwise => {
                        pairwise.extend(negs.iter().map(|&j| PairwiseExample {
                            user: u,
                            pos_item: i,
                            neg_item: j,
                            pos_pop,
                        }));
                    }
                    Objective::Pointwise => {
                        let copies = match self.kind {
                            SamplerKind::Standard => 1,
                            SamplerKind::Balanced => self.t,
                        };
                        let pos = PointwiseExample {
                            user: u,
                            item: i,
                            label: true,
                            item_pop: pos_pop,
                            anchor: i,
                        };
                        pointwise.extend(std::iter::repeat_n(pos, copies));
                        pointwise.extend(negs.iter().map(|&j| PointwiseExample {
                            user: u,
                            item: j,
                            label: false,
                            item_pop: self.stats.pop[j],
                            anchor: i,
                        }));
                    }
                }
            }
        }
        if skipped > 0 {
            log::warn!("{skipped} users observed every item and were skipped");
        }
        match self.objective {
            Objective::Pairwise => {
                pairwise.shuffle(&mut self.rng);
                Examples::Pairwise(pairwise)
            }
            Objective::Pointwise => {
                pointwise.shuffle(&mut self.rng);
                Examples::Pointwise(pointwise)
            }
        }
    }

    fn uniform_negative(&mut self, u: usize) -> usize {
        let n = self.split.n_items;
        for _ in 0..REJECTION_CAP {
            let j = self.rng.gen_range(0..n);
            if !self.split.train.contains(u, j) {
                return j;
            }
        }
        let observed = self.split.train.items(u);
        let free: Vec<usize> = (0..n)
            .filter(|j| observed.binary_search(j).is_err())
            .collect();
        free[self.rng.gen_range(0..free.len())]
    }

    /// Draws uniformly from `by_count[range]` excluding the user's observed
    /// items. The caller guarantees at least one candidate exists.
    fn side_negative(&mut self, u: usize, lo: usize, hi: usize) -> usize {
        for _ in 0..REJECTION_CAP {
            let j = self.by_count[self.rng.gen_range(lo..hi)];
            if !self.split.train.contains(u, j) {
                return j;
            }
        }
        let free: Vec<usize> = self.by_count[lo..hi]
            .iter()
            .copied()
            .filter(|&j| !self.split.train.contains(u, j))
            .collect();
        free[self.rng.gen_range(0..free.len())]
    }

    fn balanced_negatives(&mut self, u: usize, i: usize, out: &mut Vec<usize>) {
        let c = self.stats.count[i];
        let n = self.split.n_items;
        let less_end = self.less_end[i];
        let more_start = self.more_start[i];
        let seen = &self.observed_counts[u];
        let seen_less = seen.partition_point(|&x| x < c);
        let seen_more = seen.len() - seen.partition_point(|&x| x <= c);
        let has_less = less_end > seen_less;
        let has_more = n - more_start > seen_more;

        let (n_less, n_more) = match (has_less, has_more) {
            (true, true) => (self.t / 2, self.t / 2),
            (true, false) => (self.t, 0),
            (false, true) => (0, self.t),
            (false, false) => {
                for _ in 0..self.t {
                    let j = self.uniform_negative(u);
                    out.push(j);
                }
                return;
            }
        };
        for _ in 0..n_less {
            let j = self.side_negative(u, 0, less_end);
            out.push(j);
        }
        for _ in 0..n_more {
            let j = self.side_negative(u, more_start, n);
            out.push(j);
        }
    }
}

/// One epoch of uniformly mined examples.
pub fn sample_standard(
    split: &SplitDataset,
    stats: &PopularityStats,
    objective: Objective,
    t: usize,
    seed: u64,
) -> Result<Examples, SamplingError> {
    Ok(Sampler::new(split, stats, SamplerKind::Standard, objective, t, seed)?.epoch())
}

/// One epoch of popularity-balanced examples.
pub fn sample_balanced_popularity(
    split: &SplitDataset,
    stats: &PopularityStats,
    objective: Objective,
    t: usize,
    seed: u64,
) -> Result<Examples, SamplingError> {
    Ok(Sampler::new(split, stats, SamplerKind::Balanced, objective, t, seed)?.epoch())
}
