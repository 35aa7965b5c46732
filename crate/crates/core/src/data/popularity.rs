use std::fmt;
use std::str::FromStr;

use super::{DataError, Result, SplitDataset};

/// Popularity tier by cumulative share of training interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bucket {
    Head,
    Mid,
    Tail,
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bucket::Head => "head",
            Bucket::Mid => "mid",
            Bucket::Tail => "tail",
        })
    }
}

impl FromStr for Bucket {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(Bucket::Head),
            "mid" => Ok(Bucket::Mid),
            "tail" => Ok(Bucket::Tail),
            _ => Err(DataError::InvalidParameter(format!("unknown bucket `{s}`"))),
        }
    }
}

pub const HEAD_SHARE: f64 = 0.5;
pub const MID_SHARE: f64 = 0.75;

/// Item popularity computed on the training relation.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityStats {
    /// Training users per item.
    pub count: Vec<usize>,
    /// `count / n_users`.
    pub pop: Vec<f64>,
    pub bucket: Vec<Bucket>,
    pub n_users: usize,
}

impl PopularityStats {
    /// Builds stats from per-item counts over `n_users` users.
    pub fn from_counts(count: Vec<usize>, n_users: usize) -> Result<Self> {
        let total: usize = count.iter().sum();
        if total == 0 || n_users == 0 {
            return Err(DataError::Empty);
        }
        let pop = count.iter().map(|&c| c as f64 / n_users as f64).collect();
        let bucket = assign_buckets(&count);
        Ok(Self {
            count,
            pop,
            bucket,
            n_users,
        })
    }

    pub fn n_items(&self) -> usize {
        self.count.len()
    }

    /// Items of one bucket, ascending.
    pub fn items_in(&self, b: Bucket) -> Vec<usize> {
        (0..self.count.len())
            .filter(|&i| self.bucket[i] == b)
            .collect()
    }

    /// Items ordered by count descending, index ascending on ties.
    pub fn ranking(&self) -> Vec<usize> {
        descending_order(&self.count)
    }

    /// Tab-separated `item, count, pop, bucket` table with header.
    pub fn render_tsv(&self) -> String {
        let mut s = String::from("item\tcount\tpop\tbucket\n");
        for i in 0..self.count.len() {
            s.push_str(&format!(
                "{i}\t{}\t{}\t{}\n",
                self.count[i], self.pop[i], self.bucket[i]
            ));
        }
        s
    }

    /// Parses the table written by [`PopularityStats::render_tsv`].
    pub fn parse_tsv(text: &str, n_users: usize) -> Result<Self> {
        let mut count = Vec::new();
        let mut pop = Vec::new();
        let mut bucket = Vec::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = |msg: &str| DataError::Parse {
                line: idx + 1,
                msg: msg.to_string(),
            };
            if f.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            if f[0].parse::<usize>().ok() != Some(count.len()) {
                return Err(bad("items must be listed in index order"));
            }
            count.push(f[1].parse().map_err(|_| bad("bad count"))?);
            pop.push(f[2].parse().map_err(|_| bad("bad pop"))?);
            bucket.push(f[3].parse()?);
        }
        Ok(Self {
            count,
            pop,
            bucket,
            n_users,
        })
    }
}

fn descending_order(count: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..count.len()).collect();
    order.sort_by(|&a, &b| count[b].cmp(&count[a]).then(a.cmp(&b)));
    order
}

/// An item is Head when the share accumulated strictly before it is below
/// 50%, Mid when below 75%, Tail otherwise. Zero-count items are always Tail.
fn assign_buckets(count: &[usize]) -> Vec<Bucket> {
    let total: usize = count.iter().sum();
    let mut bucket = vec![Bucket::Tail; count.len()];
    let mut before = 0usize;
    for i in descending_order(count) {
        if count[i] == 0 {
            break;
        }
        let share = before as f64 / total as f64;
        bucket[i] = if share < HEAD_SHARE {
            Bucket::Head
        } else if share < MID_SHARE {
            Bucket::Mid
        } else {
            Bucket::Tail
        };
        before += count[i];
    }
    bucket
}

/// Per-item training counts, normalized popularity and head/mid/tail buckets.
pub fn compute_popularity(split: &SplitDataset) -> Result<PopularityStats> {
    if split.train.is_empty() {
        return Err(DataError::Empty);
    }
    PopularityStats::from_counts(split.train.item_counts(), split.n_users)
}
