//! Data-module oracles: generator shape, bucket boundaries, temporal split
//! and balanced test construction against brute-force recomputation.

mod common;

use popdebias::data::{
    build_balanced_test, compute_popularity, generate_synthetic, parse_interactions,
    temporal_split, Format, Interaction, InteractionDataset, PopularityStats,
};

fn item_counts(ds: &InteractionDataset) -> Vec<usize> {
    let mut c = vec![0usize; ds.n_items()];
    for r in ds.records() {
        c[r.item] += 1;
    }
    c
}

#[test]
fn zipf_top_decile_holds_majority() {
    let ds = generate_synthetic(2000, 1000, 40, 1.2, 11).unwrap();
    let mut c = item_counts(&ds);
    c.sort_unstable_by(|a, b| b.cmp(a));
    let total: usize = c.iter().sum();
    // Items never drawn are absent from the dataset, so pad to the catalog size.
    let top: usize = c.iter().take(100).sum();
    assert!(
        top as f64 / total as f64 > 0.5,
        "top decile share {}",
        top as f64 / total as f64
    );
}

#[test]
fn zero_skew_is_uniform_within_binomial_tolerance() {
    let (users, items, per_user) = (2000, 50, 5);
    let ds = generate_synthetic(users, items, per_user, 0.0, 3).unwrap();
    let c = item_counts(&ds);
    assert_eq!(c.len(), items);
    let expected = (users * per_user) as f64 / items as f64;
    let p = per_user as f64 / items as f64;
    let sd = (users as f64 * p * (1.0 - p)).sqrt();
    for (i, &n) in c.iter().enumerate() {
        assert!(
            (n as f64 - expected).abs() < 5.0 * sd,
            "item {i}: {n} vs {expected}"
        );
    }
}

#[test]
fn generator_is_deterministic_and_timestamps_increase() {
    let a = generate_synthetic(50, 80, 10, 1.2, 5).unwrap();
    let b = generate_synthetic(50, 80, 10, 1.2, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    a.write(dir.path().join("a.csv"), Format::Csv).unwrap();
    b.write(dir.path().join("b.csv"), Format::Csv).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap()
    );
    let mut last = vec![i64::MIN; a.n_users()];
    for r in a.records() {
        assert!(r.timestamp > last[r.user]);
        last[r.user] = r.timestamp;
    }
    assert!(generate_synthetic(5, 3, 4, 1.0, 0).is_err());
}

#[test]
fn buckets_match_cumulative_scan_on_zipf_catalog() {
    for seed in 0..5 {
        let ds = generate_synthetic(400, 100, 12, 1.2, seed).unwrap();
        let counts = item_counts(&ds);
        let stats = PopularityStats::from_counts(counts.clone(), ds.n_users()).unwrap();
        assert_eq!(stats.bucket, common::buckets(&counts), "seed {seed}");
    }
}

#[test]
fn temporal_split_holds_out_latest_fraction() {
    let ds = generate_synthetic(60, 40, 9, 1.0, 2).unwrap();
    let split = temporal_split(&ds, 0.2).unwrap();
    for u in 0..ds.n_users() {
        let mut mine: Vec<_> = ds.records().iter().filter(|r| r.user == u).collect();
        mine.sort_by_key(|r| (r.timestamp, r.order));
        let n_test = ((0.2 * mine.len() as f64) - 1e-9).ceil() as usize;
        let mut want_test: Vec<usize> =
            mine[mine.len() - n_test..].iter().map(|r| r.item).collect();
        let mut want_train: Vec<usize> =
            mine[..mine.len() - n_test].iter().map(|r| r.item).collect();
        want_test.sort_unstable();
        want_train.sort_unstable();
        assert_eq!(split.test.items(u), want_test.as_slice());
        assert_eq!(split.train.items(u), want_train.as_slice());
    }
}

#[test]
fn split_worked_example() {
    // one user, ten interactions at t = 1..10 → train t ≤ 8, test t ∈ {9, 10}
    let raw: Vec<Interaction> = (1..=10)
        .map(|t| Interaction {
            user: "u".into(),
            item: format!("i{t}"),
            value: 1.0,
            timestamp: t,
        })
        .collect();
    let ds = InteractionDataset::from_interactions(raw).unwrap();
    let split = temporal_split(&ds, 0.2).unwrap();
    let id = |i: usize| ds.item_id(i).to_string();
    let test: Vec<String> = split.test.items(0).iter().map(|&i| id(i)).collect();
    assert_eq!(test, vec!["i9", "i10"]);
    assert_eq!(split.train.items(0).len(), 8);
}

#[test]
fn balanced_test_has_constant_multiplicity_and_is_seeded() {
    let ds = generate_synthetic(300, 60, 10, 1.0, 9).unwrap();
    let split = temporal_split(&ds, 0.3).unwrap();
    for m in [1usize, 3] {
        let a = build_balanced_test(&split, m, 4).unwrap();
        let b = build_balanced_test(&split, m, 4).unwrap();
        assert_eq!(a.balanced(), b.balanced());
        let bal = a.balanced().unwrap();
        let full = split.test.item_counts();
        for (i, &c) in bal.item_counts().iter().enumerate() {
            if full[i] >= m {
                assert_eq!(c, m, "item {i}");
            } else {
                assert_eq!(c, 0, "item {i}");
            }
        }
        assert!(bal.pairs().all(|(u, i)| split.test.contains(u, i)));
    }
    assert!(build_balanced_test(&split, 10_000, 4).is_err());
}

#[test]
fn popularity_comes_from_training_only() {
    let ds = generate_synthetic(80, 30, 6, 1.0, 1).unwrap();
    let split = temporal_split(&ds, 0.5).unwrap();
    let stats = compute_popularity(&split).unwrap();
    for i in 0..split.n_items {
        assert_eq!(stats.count[i], common::train_count(&split, i));
        assert!((stats.pop[i] - stats.count[i] as f64 / split.n_users as f64).abs() < 1e-15);
    }
    let round = PopularityStats::parse_tsv(&stats.render_tsv(), split.n_users).unwrap();
    assert_eq!(round, stats);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let text = "1::10::5::100\n1::11::4::101\nbroken line\n";
    match parse_interactions(text, Format::MovielensDat) {
        Err(popdebias::data::DataError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}
