//! Interaction logs, temporal splits, popularity statistics and synthetic data.

mod io;
mod popularity;
mod split;
mod synthetic;

use std::collections::HashMap;

use thiserror::Error;

pub use io::{load_interactions, parse_interactions, write_interactions, Format};
pub use popularity::{compute_popularity, Bucket, PopularityStats};
pub use split::{build_balanced_test, temporal_split, SplitDataset, SplitReport};
pub use synthetic::{generate_synthetic, generate_synthetic_with_taste, Taste};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dataset is empty")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no item has at least {m} test interactions; use a smaller m")]
    BalancedTestEmpty { m: usize },
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// A raw feedback record keyed by external identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    /// Rating or frequency; always positive.
    pub value: f64,
    /// Seconds since the epoch.
    pub timestamp: i64,
}

/// An interaction resolved to dense indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub user: usize,
    pub item: usize,
    pub value: f64,
    pub timestamp: i64,
    /// Position of the winning raw record in the input; breaks timestamp ties.
    pub order: usize,
}

/// Deduplicated interactions with dense user and item indices.
#[derive(Debug, Clone)]
pub struct InteractionDataset {
    records: Vec<Record>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
}

impl InteractionDataset {
    /// Indexes users and items in first-appearance order and keeps, for each
    /// (user, item) pair, the record with the latest timestamp (the later one
    /// in input order on equal timestamps).
    pub fn from_interactions(raw: Vec<Interaction>) -> Result<Self> {
        if raw.is_empty() {
            return Err(DataError::Empty);
        }
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut user_index = HashMap::new();
        let mut item_index = HashMap::new();
        let mut latest: HashMap<(usize, usize), Record> = HashMap::new();

        for (order, it) in raw.into_iter().enumerate() {
            if !(it.value > 0.0) || !it.value.is_finite() {
                return Err(DataError::Parse {
                    line: order + 1,
                    msg: format!("feedback value must be positive, got {}", it.value),
                });
            }
            let user = *user_index.entry(it.user.clone()).or_insert_with(|| {
                user_ids.push(it.user.clone());
                user_ids.len() - 1
            });
            let item = *item_index.entry(it.item.clone()).or_insert_with(|| {
                item_ids.push(it.item.clone());
                item_ids.len() - 1
            });
            let rec = Record {
                user,
                item,
                value: it.value,
                timestamp: it.timestamp,
                order,
            };
            latest
                .entry((user, item))
                .and_modify(|prev| {
                    if rec.timestamp >= prev.timestamp {
                        *prev = rec;
                    }
                })
                .or_insert(rec);
        }

        let mut records: Vec<Record> = latest.into_values().collect();
        records.sort_by_key(|r| r.order);
        Ok(Self {
            records,
            user_ids,
            item_ids,
            user_index,
            item_index,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// Records mapped back to external identifiers.
    pub fn interactions(&self) -> impl Iterator<Item = Interaction> + '_ {
        self.records.iter().map(|r| Interaction {
            user: self.user_ids[r.user].clone(),
            item: self.item_ids[r.item].clone(),
            value: r.value,
            timestamp: r.timestamp,
        })
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn user_id(&self, u: usize) -> &str {
        &self.user_ids[u]
    }

    pub fn item_id(&self, i: usize) -> &str {
        &self.item_ids[i]
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).copied()
    }
}

/// A binary user→item relation stored as sorted per-user item lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    n_items: usize,
    rows: Vec<Vec<usize>>,
}

impl Relation {
    pub fn new(n_users: usize, n_items: usize) -> Self {
        Self {
            n_items,
            rows: vec![Vec::new(); n_users],
        }
    }

    /// Builds a relation from (user, item) pairs; duplicates collapse.
    pub fn from_pairs(
        n_users: usize,
        n_items: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let mut rel = Self::new(n_users, n_items);
        for (u, i) in pairs {
            rel.rows[u].push(i);
        }
        for row in &mut rel.rows {
            row.sort_unstable();
            row.dedup();
        }
        rel
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn items(&self, u: usize) -> &[usize] {
        &self.rows[u]
    }

    pub fn contains(&self, u: usize, i: usize) -> bool {
        self.rows[u].binary_search(&i).is_ok()
    }

    /// Number of stored pairs.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    /// All pairs, user-major.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&i| (u, i)))
    }

    /// Per-item number of users holding the item.
    pub fn item_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_items];
        for (_, i) in self.pairs() {
            counts[i] += 1;
        }
        counts
    }

    /// Per-item user lists, users ascending.
    pub fn transpose(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.n_items];
        for (u, i) in self.pairs() {
            cols[i].push(u);
        }
        cols
    }
}
