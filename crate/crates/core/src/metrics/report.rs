use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    coverage, exposure_probability, ieo, isp_over, novelty, ranking_accuracy, true_positive_rate,
    MetricError, RecommendationRun, Result,
};
use crate::data::{PopularityStats, SplitDataset};

/// Which test relation a metric was computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Balanced,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::Balanced => "balanced",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Variant::Full),
            "balanced" => Ok(Variant::Balanced),
            _ => Err(format!("unknown variant `{s}`")),
        }
    }
}

/// Metric names in report order. All are higher-is-better.
pub const METRICS: [&str; 7] = [
    "ndcg",
    "precision",
    "recall",
    "isp",
    "ieo",
    "novelty",
    "coverage",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub metric: String,
    pub cutoff: usize,
    pub variant: Variant,
    pub value: f64,
}

/// Scalar metrics plus per-item vectors for one treatment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub treatment: String,
    pub entries: Vec<MetricEntry>,
    /// `exposure@k/variant` and `tpr@k/variant` → `(item, probability)`.
    pub vectors: BTreeMap<String, Vec<(usize, f64)>>,
    /// Items excluded from a vector because their denominator was zero.
    pub flagged: BTreeMap<String, Vec<usize>>,
    pub config: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn new(treatment: impl Into<String>) -> Self {
        Self {
            treatment: treatment.into(),
            entries: Vec::new(),
            vectors: BTreeMap::new(),
            flagged: BTreeMap::new(),
            config: BTreeMap::new(),
        }
    }

    pub fn get(&self, metric: &str, cutoff: usize, variant: Variant) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.metric == metric && e.cutoff == cutoff && e.variant == variant)
            .map(|e| e.value)
    }

    /// Distinct cutoffs, ascending.
    pub fn cutoffs(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.entries.iter().map(|e| e.cutoff).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    fn push(&mut self, metric: &str, cutoff: usize, variant: Variant, value: f64) {
        self.entries.push(MetricEntry {
            metric: metric.to_string(),
            cutoff,
            variant,
            value,
        });
    }

    /// Evaluates `run` at its cutoff on the full test set and, when present,
    /// on the balanced one.
    ///
    /// On the balanced variant ISP is restricted to items present in the
    /// balanced test set; novelty and coverage do not depend on the test set
    /// and are repeated unchanged.
    pub fn add_run(
        &mut self,
        run: &RecommendationRun,
        split: &SplitDataset,
        stats: &PopularityStats,
    ) -> Result<()> {
        let k = run.k;
        let exposure = exposure_probability(run, split)?;
        let nov = novelty(run, stats);
        let cov = coverage(run, split.n_items);
        let mut variants = vec![(Variant::Full, &split.test)];
        if let Some(b) = split.balanced() {
            variants.push((Variant::Balanced, b));
        }
        for (variant, test) in variants {
            let acc = ranking_accuracy(run, test)?;
            let support = test.item_counts();
            let items: Vec<usize> = match variant {
                Variant::Full => (0..split.n_items).collect(),
                Variant::Balanced => (0..split.n_items).filter(|&i| support[i] > 0).collect(),
            };
            let isp = isp_over(&exposure, items.iter().copied())?;
            let ieo = ieo(run, test)?;
            self.push("ndcg", k, variant, acc.ndcg);
            self.push("precision", k, variant, acc.precision);
            self.push("recall", k, variant, acc.recall);
            self.push("isp", k, variant, isp);
            self.push("ieo", k, variant, ieo);
            self.push("novelty", k, variant, nov);
            self.push("coverage", k, variant, cov);

            let key = |name: &str| format!("{name}@{k}/{variant}");
            let exp: Vec<(usize, f64)> = items
                .iter()
                .filter(|&&i| exposure.eligible[i] > 0)
                .map(|&i| (i, exposure.p[i]))
                .collect();
            let flagged: Vec<usize> = items
                .iter()
                .copied()
                .filter(|&i| exposure.eligible[i] == 0)
                .collect();
            self.vectors.insert(key("exposure"), exp);
            self.flagged.insert(key("exposure"), flagged);
            self.vectors
                .insert(key("tpr"), true_positive_rate(run, test)?);
        }
        Ok(())
    }

    /// `metric,cutoff,variant,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,cutoff,variant,value\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{}\n",
                e.metric, e.cutoff, e.variant, e.value
            ));
        }
        s
    }

    /// `treatment,metric,cutoff,variant,value` rows; `header` controls the first line.
    pub fn to_treatment_csv(&self, header: bool) -> String {
        let mut s = String::new();
        if header {
            s.push_str(TREATMENT_HEADER);
            s.push('\n');
        }
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                self.treatment, e.metric, e.cutoff, e.variant, e.value
            ));
        }
        s
    }

    /// JSON sidecar with entries, per-item vectors and the config snapshot.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are finite")
    }

    /// Parses `treatment,metric,cutoff,variant,value` CSV into one report per
    /// treatment, in order of first appearance.
    pub fn parse_treatment_csv(text: &str) -> Result<Vec<MetricReport>> {
        let mut out: Vec<MetricReport> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() || line == TREATMENT_HEADER {
                continue;
            }
            let bad = |msg: &str| MetricError::Parse {
                line: line_no,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 columns"));
            }
            let cutoff = f[2].parse().map_err(|_| bad("bad cutoff"))?;
            let variant = f[3].parse().map_err(|e: String| bad(&e))?;
            let value = f[4].parse().map_err(|_| bad("bad value"))?;
            let report = match out.iter_mut().position(|r| r.treatment == f[0]) {
                Some(p) => &mut out[p],
                None => {
                    out.push(MetricReport::new(f[0]));
                    out.last_mut().expect("just pushed")
                }
            };
            report.push(f[1], cutoff, variant, value);
        }
        Ok(out)
    }
}

pub const TREATMENT_HEADER: &str = "treatment,metric,cutoff,variant,value";

/// Evaluates a run into a fresh single-run report.
pub fn evaluate_run(
    treatment: &str,
    run: &RecommendationRun,
    split: &SplitDataset,
    stats: &PopularityStats,
) -> Result<MetricReport> {
    let mut r = MetricReport::new(treatment);
    r.add_run(run, split, stats)?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_balanced_test, compute_popularity, Relation};

    fn setup() -> (SplitDataset, PopularityStats, RecommendationRun) {
        let train = Relation::from_pairs(3, 5, [(0, 0), (1, 0), (2, 1), (0, 4)]);
        let test = Relation::from_pairs(3, 5, [(0, 2), (1, 2), (2, 3), (1, 3)]);
        let split = build_balanced_test(&SplitDataset::from_relations(train, test), 1, 0).unwrap();
        let stats = compute_popularity(&split).unwrap();
        let run = RecommendationRun::new(
            2,
            vec![
                vec![(2, 1.0), (1, 0.5)],
                vec![(3, 1.0), (1, 0.0)],
                vec![(2, 0.3), (0, 0.1)],
            ],
        );
        (split, stats, run)
    }

    #[test]
    fn report_has_every_metric_for_both_variants() {
        let (split, stats, run) = setup();
        let r = evaluate_run("base", &run, &split, &stats).unwrap();
        for m in METRICS {
            for v in [Variant::Full, Variant::Balanced] {
                let x = r.get(m, 2, v).unwrap_or_else(|| panic!("{m} {v}"));
                assert!((0.0..=1.0).contains(&x), "{m} {v} = {x}");
            }
        }
        assert_eq!(r.entries.len(), 14);
        assert!(r.vectors.contains_key("exposure@2/full"));
        assert!(r.vectors.contains_key("tpr@2/balanced"));
    }

    #[test]
    fn csv_shapes_and_parse() {
        let (split, stats, run) = setup();
        let r = evaluate_run("sam+reg", &run, &split, &stats).unwrap();
        assert!(r
            .to_csv()
            .starts_with("metric,cutoff,variant,value\nndcg,2,full,"));
        let mut text = r.to_treatment_csv(true);
        let mut other = r.clone();
        other.treatment = "base".into();
        text.push_str(&other.to_treatment_csv(false));
        let parsed = MetricReport::parse_treatment_csv(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].treatment, "sam+reg");
        assert_eq!(parsed[0].entries, r.entries);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["treatment"], "sam+reg");
    }

    #[test]
    fn evaluation_is_pure() {
        let (split, stats, run) = setup();
        let a = evaluate_run("x", &run, &split, &stats).unwrap();
        let b = evaluate_run("x", &run, &split, &stats).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}
