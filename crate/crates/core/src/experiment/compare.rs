//! Side-by-side comparison of metric reports.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::metrics::{MetricReport, Variant, METRICS};

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("need at least two reports to compare, got {0}")]
    TooFew(usize),
    #[error("report `{treatment}` has cutoffs {found:?}, expected {expected:?}")]
    CutoffMismatch {
        treatment: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: String,
    pub cutoff: usize,
    pub variant: Variant,
    /// One value per report, in report order.
    pub values: Vec<Option<f64>>,
    /// Index of the unique strictly best report, if any.
    pub best: Option<usize>,
}

/// One column per report, one row per (cutoff, variant, metric).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub treatments: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Index of the unique maximum among at least two present values.
fn unique_best(values: &[Option<f64>]) -> Option<usize> {
    let present: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    if present.len() < 2 {
        return None;
    }
    let max = present
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut at_max = present.iter().filter(|p| p.1 == max);
    let first = at_max.next()?;
    at_max.next().is_none().then_some(first.0)
}

/// Builds the comparison table. All metrics are higher-is-better.
pub fn compare_runs(reports: &[MetricReport]) -> Result<ComparisonTable, CompareError> {
    if reports.len() < 2 {
        return Err(CompareError::TooFew(reports.len()));
    }
    let expected = reports[0].cutoffs();
    for r in &reports[1..] {
        let found = r.cutoffs();
        if found != expected {
            return Err(CompareError::CutoffMismatch {
                treatment: r.treatment.clone(),
                expected,
                found,
            });
        }
    }
    let mut extra: BTreeSet<String> = BTreeSet::new();
    for r in reports {
        for e in &r.entries {
            if !METRICS.contains(&e.metric.as_str()) {
                extra.insert(e.metric.clone());
            }
        }
    }
    let metrics: Vec<String> = METRICS.iter().map(|m| m.to_string()).chain(extra).collect();
    let mut rows = Vec::new();
    for &cutoff in &expected {
        for variant in [Variant::Full, Variant::Balanced] {
            for metric in &metrics {
                let values: Vec<Option<f64>> = reports
                    .iter()
                    .map(|r| r.get(metric, cutoff, variant))
                    .collect();
                if values.iter().all(Option::is_none) {
                    continue;
                }
                rows.push(ComparisonRow {
                    metric: metric.clone(),
                    cutoff,
                    variant,
                    best: unique_best(&values),
                    values,
                });
            }
        }
    }
    Ok(ComparisonTable {
        treatments: reports.iter().map(|r| r.treatment.clone()).collect(),
        rows,
    })
}

impl ComparisonTable {
    /// Fixed-width text table; the best cell of each row carries a `*`.
    pub fn render(&self) -> String {
        let label = |r: &ComparisonRow| format!("{}@{}-{}", r.metric, r.cutoff, r.variant);
        let first_w = self
            .rows
            .iter()
            .map(|r| label(r).len())
            .chain(std::iter::once("metric".len()))
            .max()
            .unwrap_or(6);
        let col_w: Vec<usize> = self.treatments.iter().map(|t| t.len().max(8)).collect();
        let mut s = format!("{:<first_w$}", "metric");
        for (t, w) in self.treatments.iter().zip(&col_w) {
            s.push_str(&format!("  {t:>w$}"));
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!("{:<first_w$}", label(r)));
            for (i, (v, w)) in r.values.iter().zip(&col_w).enumerate() {
                let cell = match v {
                    Some(v) if r.best == Some(i) => format!("*{v:.4}"),
                    Some(v) => format!("{v:.4}"),
                    None => "-".to_string(),
                };
                s.push_str(&format!("  {cell:>w$}"));
            }
            s.push('\n');
        }
        s
    }

    /// `metric,cutoff,variant,<treatment>...,best` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,cutoff,variant");
        for t in &self.treatments {
            s.push(',');
            s.push_str(t);
        }
        s.push_str(",best\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}", r.metric, r.cutoff, r.variant));
            for v in &r.values {
                s.push(',');
                if let Some(v) = v {
                    s.push_str(&v.to_string());
                }
            }
            s.push(',');
            if let Some(b) = r.best {
                s.push_str(&self.treatments[b]);
            }
            s.push('\n');
        }
        s
    }
}
