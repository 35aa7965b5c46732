//! Experiment orchestration: configuration, the treatment grid, λ sweeps,
//! artifact emission and side-by-side comparison of reports.

mod compare;
mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data::{
    build_balanced_test, compute_popularity, generate_synthetic_with_taste, load_interactions,
    temporal_split, DataError, InteractionDataset, PopularityStats, SplitDataset,
};
use crate::metrics::{
    pairwise_accuracy_buckets, relevance_distribution_sample, MetricError, MetricReport,
    PairwiseAccuracyTable, RecommendationRun, RelevanceSample, Variant, METRICS,
};
use crate::model::{
    baseline_mostpop, baseline_random, recommend_topk, train, write_checkpoint, EpochTrace,
    FactorModel, ModelError, TrainConfig,
};
use crate::rerank::{profile_ratios, rerank, RerankError, ScoredCandidates};
use crate::seed::{self, stream};

pub use compare::{compare_runs, CompareError, ComparisonRow, ComparisonTable};
pub use config::{DatasetSpec, ExperimentConfig, Treatment};

/// Marker file present in an output directory while a run is in progress or
/// after it failed.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentConfig {
    /// Reads and parses a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// Pipeline stage at which an experiment failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Split,
    Stats,
    Train,
    Recommend,
    Metrics,
    Rerank,
    Diagnostics,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Split => "split",
            Stage::Stats => "stats",
            Stage::Train => "train",
            Stage::Recommend => "recommend",
            Stage::Metrics => "metrics",
            Stage::Rerank => "rerank",
            Stage::Diagnostics => "diagnostics",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// An experiment failure tagged with the stage that raised it.
#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct ExperimentError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl ExperimentError {
    /// Process exit code: 1 config, 2 data or i/o, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match &self.source {
            StageError::Config(_) => 1,
            StageError::Model(ModelError::NonFinite { .. })
            | StageError::Rerank(RerankError::Model(ModelError::NonFinite { .. })) => 3,
            StageError::Model(ModelError::InvalidConfig(_))
            | StageError::Rerank(RerankError::InvalidStrength(_) | RerankError::UnknownMethod(_)) => {
                1
            }
            _ => 2,
        }
    }
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

trait At<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T, E: Into<StageError>> At<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| ExperimentError {
            stage,
            source: e.into(),
        })
    }
}

/// Dataset, split and popularity statistics shared by every run of a config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: InteractionDataset,
    /// Temporal split with the balanced test subset attached.
    pub split: SplitDataset,
    pub stats: PopularityStats,
    /// Per-user Mid ∪ Tail share of the training profile.
    pub profile: Vec<f64>,
}

/// Runs the load, split and stats stages.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let dataset = match &cfg.dataset {
        DatasetSpec::File { path, format } => load_interactions(path, *format),
        DatasetSpec::Synthetic {
            users,
            items,
            per_user,
            skew,
            taste,
        } => generate_synthetic_with_taste(
            *users,
            *items,
            *per_user,
            *skew,
            *taste,
            seed::derive(cfg.seed, stream::SYNTHETIC),
        ),
    }
    .at(Stage::Load)?;
    log::info!(
        "loaded {} interactions, {} users, {} items",
        dataset.len(),
        dataset.n_users(),
        dataset.n_items()
    );
    let split = temporal_split(&dataset, cfg.test_ratio).at(Stage::Split)?;
    let split = build_balanced_test(
        &split,
        cfg.balanced_m,
        seed::derive(cfg.seed, stream::BALANCED_TEST),
    )
    .at(Stage::Split)?;
    let stats = compute_popularity(&split).at(Stage::Stats)?;
    let profile = profile_ratios(&split, &stats);
    Ok(Prepared {
        dataset,
        split,
        stats,
        profile,
    })
}

/// Everything a single treatment run produces, kept in memory.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// The trained treatment first, then re-ranked variants, then baselines.
    pub reports: Vec<MetricReport>,
    pub train_config: TrainConfig<f64>,
    pub model: FactorModel<f64>,
    pub trace: Vec<EpochTrace>,
    /// Model recommendations at the largest cutoff.
    pub run: RecommendationRun,
    /// Candidate pool handed to the re-rankers, when any are configured.
    pub candidates: Option<RecommendationRun>,
    /// `None` when the head or mid bucket is empty.
    pub pairwise: Option<PairwiseAccuracyTable>,
    pub relevance: RelevanceSample,
}

impl Outcome {
    /// Report of the trained treatment itself.
    pub fn primary(&self) -> &MetricReport {
        &self.reports[0]
    }
}

fn rerank_label(treatment: &str, method: impl fmt::Display, strength: f64) -> String {
    format!("{treatment}+{method}@{strength}")
}

/// Trains, recommends, evaluates, re-ranks and computes diagnostics for one
/// treatment at the given λ. Nothing is written to disk.
pub fn execute_with_lambda(
    cfg: &ExperimentConfig,
    data: &Prepared,
    lambda: f64,
    label: &str,
) -> Result<Outcome> {
    let train_cfg = cfg.effective_train(lambda);
    let split = &data.split;
    let stats = &data.stats;
    let out = train(split, stats, &train_cfg).at(Stage::Train)?;

    let mut cutoffs = cfg.cutoffs.clone();
    cutoffs.sort_unstable();
    cutoffs.dedup();
    let k_max = *cutoffs.last().ok_or_else(|| ExperimentError {
        stage: Stage::Config,
        source: ConfigError::Invalid {
            key: "cutoffs".into(),
            msg: "empty".into(),
        }
        .into(),
    })?;

    // The output location does not influence results, so it is left out
    // and identical configs yield identical artifacts wherever they land.
    let snapshot = {
        let mut s = cfg.snapshot();
        s.remove("output");
        s.insert("treatment".into(), label.to_string());
        s.insert("model.lambda".into(), lambda.to_string());
        s.insert("model.sampler".into(), train_cfg.sampler.to_string());
        s
    };
    let mut run = recommend_topk(&out.model, split, k_max).at(Stage::Recommend)?;
    run.provenance = snapshot.clone();
    let mut report = MetricReport::new(label);
    report.config = snapshot.clone();
    for &k in &cutoffs {
        report
            .add_run(&run.truncated(k), split, stats)
            .at(Stage::Metrics)?;
    }
    let mut reports = vec![report];

    let mut candidates = None;
    if !cfg.rerankers.is_empty() {
        let pool = cfg.candidates.max(k_max);
        let cands = ScoredCandidates::from_model(&out.model, split, pool).at(Stage::Rerank)?;
        for &(method, strength) in &cfg.rerankers {
            let name = rerank_label(label, method, strength);
            let mut r = MetricReport::new(name);
            r.config = snapshot.clone();
            r.config
                .insert("reranker".into(), format!("{method}:{strength}"));
            for &k in &cutoffs {
                let reranked =
                    rerank(method, &cands, stats, &data.profile, strength, k).at(Stage::Rerank)?;
                r.add_run(&reranked, split, stats).at(Stage::Metrics)?;
            }
            reports.push(r);
        }
        let mut c = RecommendationRun::new(pool, cands.lists);
        c.provenance = run.provenance.clone();
        candidates = Some(c);
    }

    if cfg.baselines {
        let random = baseline_random(split, k_max, seed::derive(cfg.seed, stream::BASELINE))
            .at(Stage::Recommend)?;
        let mostpop = baseline_mostpop(split, stats, k_max).at(Stage::Recommend)?;
        for (name, base) in [("random", random), ("mostpop", mostpop)] {
            let mut r = MetricReport::new(name);
            r.config = snapshot.clone();
            for &k in &cutoffs {
                r.add_run(&base.truncated(k), split, stats)
                    .at(Stage::Metrics)?;
            }
            reports.push(r);
        }
    }

    let diag_seed = seed::derive(cfg.seed, stream::DIAGNOSTICS);
    let pairwise = match pairwise_accuracy_buckets(
        &out.model,
        split,
        stats,
        cfg.samples_per_cell,
        diag_seed,
    ) {
        Ok(t) => Some(t),
        Err(MetricError::Precondition(msg)) => {
            log::warn!("skipping pair-wise accuracy table: {msg}");
            None
        }
        Err(e) => return Err(e).at(Stage::Diagnostics),
    };
    let relevance = relevance_distribution_sample(
        &out.model,
        split,
        stats,
        cfg.pairs_per_user,
        seed::derive(diag_seed, "relevance"),
    )
    .at(Stage::Diagnostics)?;

    Ok(Outcome {
        reports,
        train_config: train_cfg,
        model: out.model,
        trace: out.trace,
        run,
        candidates,
        pairwise,
        relevance,
    })
}

/// [`execute_with_lambda`] at the config's own treatment and λ.
pub fn execute(cfg: &ExperimentConfig, data: &Prepared) -> Result<Outcome> {
    let train_cfg = cfg.validate().at(Stage::Config)?;
    execute_with_lambda(cfg, data, train_cfg.lambda, &cfg.treatment.to_string())
}

fn write(path: PathBuf, body: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, body).at(Stage::Write)
}

fn reports_csv(reports: &[MetricReport]) -> String {
    let mut s = format!("{}\n", crate::metrics::TREATMENT_HEADER);
    for r in reports {
        s.push_str(&r.to_treatment_csv(false));
    }
    s
}

fn reports_json(reports: &[MetricReport]) -> String {
    serde_json::to_string_pretty(reports).expect("report values are finite")
}

/// Writes every artifact of `outcome` into `dir`.
pub fn write_artifacts(outcome: &Outcome, data: &Prepared, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).at(Stage::Write)?;
    write(dir.join("report.csv"), reports_csv(&outcome.reports))?;
    write(dir.join("report.json"), reports_json(&outcome.reports))?;
    write(
        dir.join("trace.csv"),
        EpochTrace::render_csv(&outcome.trace),
    )?;
    write_checkpoint(
        &outcome.model,
        outcome.train_config.seed,
        outcome.train_config.hash(),
        dir.join("model.txt"),
    )
    .at(Stage::Write)?;
    outcome
        .run
        .write(dir.join("recommendations.jsonl"))
        .at(Stage::Write)?;
    if let Some(c) = &outcome.candidates {
        c.write(dir.join("candidates.jsonl")).at(Stage::Write)?;
    }
    write(dir.join("popularity.tsv"), data.stats.render_tsv())?;
    let mut profile = String::from("user\tprofile_ratio\n");
    for (u, r) in data.profile.iter().enumerate() {
        profile.push_str(&format!("{u}\t{r}\n"));
    }
    write(dir.join("profile_ratio.tsv"), profile)?;
    write(dir.join("split_report.txt"), data.split.report.render())?;
    if let Some(t) = &outcome.pairwise {
        write(dir.join("pairwise_accuracy.tsv"), t.render_tsv())?;
    }
    write(
        dir.join("relevance_distribution.tsv"),
        outcome.relevance.render_tsv(),
    )?;
    Ok(())
}

/// Runs `body` with an [`INCOMPLETE_MARKER`] in `dir` that is removed on
/// success and rewritten with the failing stage on error.
fn guarded<T>(dir: &Path, body: impl FnOnce() -> Result<T>) -> Result<T> {
    fs::create_dir_all(dir).at(Stage::Write)?;
    let marker = dir.join(INCOMPLETE_MARKER);
    write(marker.clone(), "running\n")?;
    match body() {
        Ok(v) => {
            fs::remove_file(&marker).at(Stage::Write)?;
            Ok(v)
        }
        Err(e) => {
            // Best effort: the original error matters more than a failed marker write.
            let _ = fs::write(&marker, format!("{e}\n"));
            Err(e)
        }
    }
}

/// Runs the configured experiment and writes its artifacts under
/// `cfg.output`. Dispatches to [`run_lambda_sweep`] when `sweep.lambda` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricReport>> {
    cfg.validate().at(Stage::Config)?;
    if !cfg.lambda_sweep.is_empty() {
        return run_lambda_sweep(cfg);
    }
    guarded(&cfg.output, || {
        fs::write(cfg.output.join("config.txt"), cfg.render()).at(Stage::Write)?;
        let data = prepare(cfg)?;
        let outcome = execute(cfg, &data)?;
        write_artifacts(&outcome, &data, &cfg.output)?;
        Ok(outcome.reports)
    })
}

/// Label of a sweep point; the penalty-free point is named after the
/// unregularized treatment that shares its sampler.
pub fn sweep_label(treatment: Treatment, lambda: f64) -> String {
    let base = match (treatment.sampler(), lambda > 0.0) {
        (crate::sampling::SamplerKind::Standard, false) => Treatment::Base,
        (crate::sampling::SamplerKind::Standard, true) => Treatment::Reg,
        (crate::sampling::SamplerKind::Balanced, false) => Treatment::Sam,
        (crate::sampling::SamplerKind::Balanced, true) => Treatment::SamReg,
    };
    format!("{base}@lambda={lambda}")
}

/// Header of `sweep.csv`: one row per (λ, cutoff, variant).
pub fn sweep_header() -> String {
    let mut h = String::from("lambda,cutoff,variant");
    for m in METRICS {
        h.push(',');
        h.push_str(m);
    }
    h
}

/// Trains one model per λ in `sweep.lambda` with the treatment's sampler.
///
/// Each point writes its artifacts to `output/lambda=<λ>`; the root holds the
/// combined `report.csv` and the wide `sweep.csv`.
pub fn run_lambda_sweep(cfg: &ExperimentConfig) -> Result<Vec<MetricReport>> {
    cfg.validate().at(Stage::Config)?;
    guarded(&cfg.output, || {
        fs::write(cfg.output.join("config.txt"), cfg.render()).at(Stage::Write)?;
        let data = prepare(cfg)?;
        let mut reports = Vec::new();
        let mut sweep = format!("{}\n", sweep_header());
        for &lambda in &cfg.lambda_sweep {
            let label = sweep_label(cfg.treatment, lambda);
            log::info!("sweep point {label}");
            let outcome = execute_with_lambda(cfg, &data, lambda, &label)?;
            write_artifacts(
                &outcome,
                &data,
                &cfg.output.join(format!("lambda={lambda}")),
            )?;
            let primary = outcome.primary();
            for k in primary.cutoffs() {
                for variant in [Variant::Full, Variant::Balanced] {
                    sweep.push_str(&format!("{lambda},{k},{variant}"));
                    for m in METRICS {
                        let v = primary
                            .get(m, k, variant)
                            .map(|v| v.to_string())
                            .unwrap_or_default();
                        sweep.push(',');
                        sweep.push_str(&v);
                    }
                    sweep.push('\n');
                }
            }
            reports.extend(outcome.reports);
        }
        write(cfg.output.join("sweep.csv"), sweep)?;
        write(cfg.output.join("report.csv"), reports_csv(&reports))?;
        write(cfg.output.join("report.json"), reports_json(&reports))?;
        Ok(reports)
    })
}
