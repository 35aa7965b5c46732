use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MetricError, Result};

/// Per-user ranked recommendation lists.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationRun {
    pub k: usize,
    /// `(item, score)` pairs per user, best first.
    pub lists: Vec<Vec<(usize, f64)>>,
    /// Configuration snapshot that produced the run.
    pub provenance: BTreeMap<String, String>,
    /// Users whose list is shorter than `k`.
    pub short_lists: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    k: usize,
    provenance: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct UserLine {
    user: usize,
    items: Vec<(usize, f64)>,
}

impl RecommendationRun {
    pub fn new(k: usize, lists: Vec<Vec<(usize, f64)>>) -> Self {
        let short_lists = lists
            .iter()
            .enumerate()
            .filter(|(_, l)| l.len() < k)
            .map(|(u, _)| u)
            .collect();
        Self {
            k,
            lists,
            provenance: BTreeMap::new(),
            short_lists,
        }
    }

    pub fn n_users(&self) -> usize {
        self.lists.len()
    }

    /// Items of user `u`, best first.
    pub fn items(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.lists[u].iter().map(|p| p.0)
    }

    /// Keeps the first `k` entries of every list.
    pub fn truncated(&self, k: usize) -> Self {
        let lists = self
            .lists
            .iter()
            .map(|l| l.iter().take(k).copied().collect())
            .collect();
        let mut out = Self::new(k, lists);
        out.provenance = self.provenance.clone();
        out
    }

    /// Checks list lengths and uniqueness.
    pub fn validate(&self) -> Result<()> {
        for (u, l) in self.lists.iter().enumerate() {
            if l.len() > self.k {
                return Err(MetricError::Precondition(format!(
                    "user {u} has {} items for k = {}",
                    l.len(),
                    self.k
                )));
            }
            let mut items: Vec<usize> = l.iter().map(|p| p.0).collect();
            items.sort_unstable();
            if items.windows(2).any(|w| w[0] == w[1]) {
                return Err(MetricError::Precondition(format!(
                    "user {u} has duplicate items"
                )));
            }
        }
        Ok(())
    }

    /// JSON lines: a `{"k", "provenance"}` header, then one
    /// `{"user", "items": [[item, score], ...]}` object per user.
    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(&Header {
            k: self.k,
            provenance: self.provenance.clone(),
        })
        .expect("header serializes");
        s.push('\n');
        for (user, items) in self.lists.iter().enumerate() {
            let line = serde_json::to_string(&UserLine {
                user,
                items: items.clone(),
            })
            .expect("finite scores serialize");
            s.push_str(&line);
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or(MetricError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let header: Header = serde_json::from_str(head).map_err(|e| MetricError::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        let mut lists = Vec::new();
        for (idx, line) in lines {
            let ul: UserLine = serde_json::from_str(line).map_err(|e| MetricError::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            if ul.user != lists.len() {
                return Err(MetricError::Parse {
                    line: idx + 1,
                    msg: format!("expected user {}, found {}", lists.len(), ul.user),
                });
            }
            lists.push(ul.items);
        }
        let mut run = Self::new(header.k, lists);
        run.provenance = header.provenance;
        run.validate()?;
        Ok(run)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }
}
