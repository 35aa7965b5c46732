use std::fmt::Write as _;

use rand::seq::index;

use super::{DataError, InteractionDataset, Record, Relation, Result};
use crate::seed;

/// Per-user train/test bookkeeping produced by [`temporal_split`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitReport {
    /// (train, test) interaction counts indexed by user.
    pub per_user: Vec<(usize, usize)>,
    /// Users whose only interaction was kept in train.
    pub single_interaction_users: Vec<usize>,
}

impl SplitReport {
    /// Plain-text summary: totals, then one `user<TAB>train<TAB>test` line per user.
    pub fn render(&self) -> String {
        let train: usize = self.per_user.iter().map(|p| p.0).sum();
        let test: usize = self.per_user.iter().map(|p| p.1).sum();
        let mut s = String::new();
        let _ = writeln!(s, "users\t{}", self.per_user.len());
        let _ = writeln!(s, "train_interactions\t{train}");
        let _ = writeln!(s, "test_interactions\t{test}");
        let _ = writeln!(
            s,
            "single_interaction_users\t{}",
            self.single_interaction_users.len()
        );
        if !self.single_interaction_users.is_empty() {
            let ids: Vec<String> = self
                .single_interaction_users
                .iter()
                .map(usize::to_string)
                .collect();
            let _ = writeln!(s, "single_interaction_user_ids\t{}", ids.join(","));
        }
        let _ = writeln!(s, "user\ttrain\ttest");
        for (u, (tr, te)) in self.per_user.iter().enumerate() {
            let _ = writeln!(s, "{u}\t{tr}\t{te}");
        }
        s
    }
}

/// Train/test partition of an [`InteractionDataset`].
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub n_users: usize,
    pub n_items: usize,
    /// Binarized observed relation used for training and exclusion.
    pub train: Relation,
    pub test: Relation,
    /// Subset of `test` where every item has the same number of observations.
    pub balanced_test: Option<Relation>,
    pub train_records: Vec<Record>,
    pub test_records: Vec<Record>,
    pub report: SplitReport,
}

impl SplitDataset {
    /// Assembles a split directly from train and test pairs (timestamps zero).
    pub fn from_relations(train: Relation, test: Relation) -> Self {
        assert_eq!(train.n_users(), test.n_users());
        assert_eq!(train.n_items(), test.n_items());
        let to_records = |rel: &Relation| -> Vec<Record> {
            rel.pairs()
                .enumerate()
                .map(|(order, (user, item))| Record {
                    user,
                    item,
                    value: 1.0,
                    timestamp: 0,
                    order,
                })
                .collect()
        };
        let per_user = (0..train.n_users())
            .map(|u| (train.items(u).len(), test.items(u).len()))
            .collect();
        Self {
            n_users: train.n_users(),
            n_items: train.n_items(),
            train_records: to_records(&train),
            test_records: to_records(&test),
            train,
            test,
            balanced_test: None,
            report: SplitReport {
                per_user,
                single_interaction_users: Vec::new(),
            },
        }
    }

    /// The balanced test relation, when one has been built.
    pub fn balanced(&self) -> Option<&Relation> {
        self.balanced_test.as_ref()
    }
}

/// Number of test interactions for a user with `n` interactions.
///
/// `ceil(ratio * n)`, capped so that at least one interaction stays in train.
pub fn test_size(n: usize, ratio: f64) -> usize {
    if n <= 1 {
        return 0;
    }
    // The epsilon absorbs representation error such as 0.2 * 15 = 3.0000000000000004.
    let raw = (ratio * n as f64 - 1e-9).ceil().max(0.0) as usize;
    raw.min(n - 1)
}

/// Moves the most recent `ceil(ratio * n_u)` interactions of each user to test.
///
/// Timestamp ties are broken by input order: later input counts as more recent.
pub fn temporal_split(ds: &InteractionDataset, test_ratio: f64) -> Result<SplitDataset> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(DataError::InvalidParameter(format!(
            "test_ratio must lie in (0, 1), got {test_ratio}"
        )));
    }
    let n_users = ds.n_users();
    let n_items = ds.n_items();
    let mut by_user: Vec<Vec<Record>> = vec![Vec::new(); n_users];
    for r in ds.records() {
        by_user[r.user].push(*r);
    }

    let mut train_records = Vec::new();
    let mut test_records = Vec::new();
    let mut per_user = Vec::with_capacity(n_users);
    let mut singles = Vec::new();
    for (u, mut recs) in by_user.into_iter().enumerate() {
        recs.sort_by_key(|r| (r.timestamp, r.order));
        let n_test = test_size(recs.len(), test_ratio);
        if recs.len() == 1 {
            singles.push(u);
        }
        let cut = recs.len() - n_test;
        per_user.push((cut, n_test));
        test_records.extend_from_slice(&recs[cut..]);
        train_records.extend_from_slice(&recs[..cut]);
    }
    if !singles.is_empty() {
        log::info!(
            "{} users with a single interaction kept entirely in train",
            singles.len()
        );
    }

    let train = Relation::from_pairs(
        n_users,
        n_items,
        train_records.iter().map(|r| (r.user, r.item)),
    );
    let test = Relation::from_pairs(
        n_users,
        n_items,
        test_records.iter().map(|r| (r.user, r.item)),
    );
    Ok(SplitDataset {
        n_users,
        n_items,
        train,
        test,
        balanced_test: None,
        train_records,
        test_records,
        report: SplitReport {
            per_user,
            single_interaction_users: singles,
        },
    })
}

/// Keeps exactly `m` uniformly sampled test users for every item with at
/// least `m` test interactions; other items are dropped.
pub fn build_balanced_test(split: &SplitDataset, m: usize, seed: u64) -> Result<SplitDataset> {
    if m == 0 {
        return Err(DataError::InvalidParameter(
            "balanced-test m must be ≥ 1".into(),
        ));
    }
    let mut rng = seed::rng(seed);
    let mut pairs = Vec::new();
    for (item, users) in split.test.transpose().into_iter().enumerate() {
        if users.len() < m {
            continue;
        }
        for k in index::sample(&mut rng, users.len(), m).into_iter() {
            pairs.push((users[k], item));
        }
    }
    if pairs.is_empty() {
        return Err(DataError::BalancedTestEmpty { m });
    }
    let mut out = split.clone();
    out.balanced_test = Some(Relation::from_pairs(split.n_users, split.n_items, pairs));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Interaction;

    fn dataset(rows: &[(&str, &str, i64)]) -> InteractionDataset {
        InteractionDataset::from_interactions(
            rows.iter()
                .map(|&(u, i, t)| Interaction {
                    user: u.into(),
                    item: i.into(),
                    value: 1.0,
                    timestamp: t,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ten_interactions_split_eight_two() {
        let rows: Vec<(String, i64)> = (0..10)
            .map(|k| (format!("i{k}"), [5, 3, 9, 1, 7, 2, 8, 0, 6, 4][k]))
            .collect();
        let rows: Vec<(&str, &str, i64)> =
            rows.iter().map(|(i, t)| ("u", i.as_str(), *t)).collect();
        let ds = dataset(&rows);
        let split = temporal_split(&ds, 0.2).unwrap();
        assert_eq!(split.train.nnz(), 8);
        assert_eq!(split.test.nnz(), 2);
        let mut ts: Vec<i64> = split.test_records.iter().map(|r| r.timestamp).collect();
        ts.sort();
        assert_eq!(ts, vec![8, 9]);
    }

    #[test]
    fn timestamp_ties_use_input_order() {
        let ds = dataset(&[
            ("u", "a", 7),
            ("u", "b", 7),
            ("u", "c", 7),
            ("u", "d", 7),
            ("u", "e", 7),
        ]);
        let split = temporal_split(&ds, 0.2).unwrap();
        assert_eq!(split.test.nnz(), 1);
        let e = ds.item_index("e").unwrap();
        assert!(split.test.contains(0, e));
    }

    #[test]
    fn single_interaction_user_stays_in_train() {
        let ds = dataset(&[("solo", "a", 1), ("u", "a", 1), ("u", "b", 2)]);
        let split = temporal_split(&ds, 0.2).unwrap();
        assert_eq!(split.report.single_interaction_users, vec![0]);
        assert_eq!(split.report.per_user[0], (1, 0));
        assert_eq!(split.report.per_user[1], (1, 1));
        assert!(split
            .report
            .render()
            .contains("single_interaction_users\t1"));
    }

    #[test]
    fn invalid_ratio_rejected() {
        let ds = dataset(&[("u", "a", 1)]);
        assert!(temporal_split(&ds, 0.0).is_err());
        assert!(temporal_split(&ds, 1.0).is_err());
    }

    #[test]
    fn test_size_rounding() {
        assert_eq!(test_size(10, 0.2), 2);
        assert_eq!(test_size(15, 0.2), 3);
        assert_eq!(test_size(11, 0.2), 3);
        assert_eq!(test_size(3, 0.2), 1);
        assert_eq!(test_size(1, 0.2), 0);
        assert_eq!(test_size(2, 0.9), 1);
    }

    fn toy_split() -> SplitDataset {
        // item 0 in test for 7 users, item 1 for 2 users, item 2 for 3 users.
        let mut test = Vec::new();
        for u in 0..7 {
            test.push((u, 0));
        }
        test.extend([(0, 1), (1, 1), (2, 2), (3, 2), (4, 2)]);
        let train = Relation::from_pairs(8, 4, (0..8).map(|u| (u, 3)));
        SplitDataset::from_relations(train, Relation::from_pairs(8, 4, test))
    }

    #[test]
    fn balanced_test_keeps_m_per_item() {
        let split = toy_split();
        let bal = build_balanced_test(&split, 3, 11).unwrap();
        let b = bal.balanced().unwrap();
        assert_eq!(b.item_counts(), vec![3, 0, 3, 0]);
        for (u, i) in b.pairs() {
            assert!(split.test.contains(u, i));
        }
        let again = build_balanced_test(&split, 3, 11).unwrap();
        assert_eq!(again.balanced(), bal.balanced());
    }

    #[test]
    fn balanced_test_m_one_and_error() {
        let split = toy_split();
        let b = build_balanced_test(&split, 1, 0).unwrap();
        assert_eq!(b.balanced().unwrap().item_counts(), vec![1, 1, 1, 0]);
        assert!(matches!(
            build_balanced_test(&split, 8, 0),
            Err(DataError::BalancedTestEmpty { m: 8 })
        ));
        assert!(build_balanced_test(&split, 0, 0).is_err());
    }
}
