use rand::seq::{index, SliceRandom};

use super::{DataError, Interaction, InteractionDataset, Result};
use crate::seed;

/// Latent taste structure layered on top of the Zipf popularity law.
///
/// Items are dealt round-robin by popularity rank into `clusters` groups and
/// every user belongs to one group (user index modulo `clusters`). A user's
/// sampling weight for items of their own group is multiplied by `affinity`.
/// With one cluster or unit affinity every user draws from the same law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taste {
    pub clusters: usize,
    pub affinity: f64,
}

impl Default for Taste {
    fn default() -> Self {
        Self {
            clusters: 1,
            affinity: 1.0,
        }
    }
}

/// Generates a skewed implicit-feedback log.
///
/// Item `r` (0-based rank) has Zipf weight `(r + 1)^-skew`. Each user draws
/// `interactions_per_user` distinct items by successive weighted sampling
/// without replacement; the draws are then shuffled and given strictly
/// increasing per-user timestamps, so recency is independent of popularity.
pub fn generate_synthetic(
    n_users: usize,
    n_items: usize,
    interactions_per_user: usize,
    skew: f64,
    seed: u64,
) -> Result<InteractionDataset> {
    generate_synthetic_with_taste(
        n_users,
        n_items,
        interactions_per_user,
        skew,
        Taste::default(),
        seed,
    )
}

/// [`generate_synthetic`] with per-user taste clusters; see [`Taste`].
pub fn generate_synthetic_with_taste(
    n_users: usize,
    n_items: usize,
    interactions_per_user: usize,
    skew: f64,
    taste: Taste,
    seed: u64,
) -> Result<InteractionDataset> {
    if n_users == 0 || n_items == 0 || interactions_per_user == 0 {
        return Err(DataError::InvalidParameter(
            "user, item and per-user counts must be positive".into(),
        ));
    }
    if !(skew >= 0.0) || !skew.is_finite() {
        return Err(DataError::InvalidParameter(format!(
            "zipf exponent must be finite and ≥ 0, got {skew}"
        )));
    }
    if interactions_per_user > n_items {
        return Err(DataError::InvalidParameter(format!(
            "interactions_per_user ({interactions_per_user}) exceeds the item count ({n_items})"
        )));
    }
    if taste.clusters == 0 || !(taste.affinity > 0.0) || !taste.affinity.is_finite() {
        return Err(DataError::InvalidParameter(format!(
            "taste needs at least one cluster and a finite positive affinity, got {taste:?}"
        )));
    }

    let weights: Vec<f64> = (0..n_items).map(|r| ((r + 1) as f64).powf(-skew)).collect();
    let mut rng = seed::rng(seed);
    let mut raw = Vec::with_capacity(n_users * interactions_per_user);
    for u in 0..n_users {
        let group = u % taste.clusters;
        let weight = |i: usize| {
            if i % taste.clusters == group {
                weights[i] * taste.affinity
            } else {
                weights[i]
            }
        };
        let mut picks = index::sample_weighted(&mut rng, n_items, weight, interactions_per_user)
            .map_err(|e| DataError::InvalidParameter(e.to_string()))?
            .into_vec();
        picks.sort_unstable();
        picks.shuffle(&mut rng);
        for (k, item) in picks.into_iter().enumerate() {
            raw.push(Interaction {
                user: format!("u{u}"),
                item: format!("i{item}"),
                value: 1.0,
                timestamp: 1 + k as i64,
            });
        }
    }
    InteractionDataset::from_interactions(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_validation() {
        assert!(generate_synthetic(10, 5, 6, 1.0, 0).is_err());
        assert!(generate_synthetic(0, 5, 1, 1.0, 0).is_err());
        assert!(generate_synthetic(3, 5, 1, -0.5, 0).is_err());
        assert!(generate_synthetic(3, 5, 5, 1.0, 0).is_ok());
    }

    #[test]
    fn distinct_items_and_increasing_timestamps() {
        let ds = generate_synthetic(50, 40, 12, 1.2, 3).unwrap();
        assert_eq!(ds.len(), 50 * 12);
        let mut per_user: Vec<Vec<(i64, usize)>> = vec![Vec::new(); ds.n_users()];
        for r in ds.records() {
            per_user[r.user].push((r.timestamp, r.item));
        }
        for recs in per_user {
            assert_eq!(recs.len(), 12);
            let mut items: Vec<usize> = recs.iter().map(|p| p.1).collect();
            items.sort();
            items.dedup();
            assert_eq!(items.len(), 12);
            assert!(recs.windows(2).all(|w| w[0].0 < w[1].0));
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a: Vec<_> = generate_synthetic(30, 20, 5, 1.0, 9)
            .unwrap()
            .interactions()
            .collect();
        let b: Vec<_> = generate_synthetic(30, 20, 5, 1.0, 9)
            .unwrap()
            .interactions()
            .collect();
        let c: Vec<_> = generate_synthetic(30, 20, 5, 1.0, 10)
            .unwrap()
            .interactions()
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
