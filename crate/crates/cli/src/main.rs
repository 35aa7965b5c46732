//! Command-line front end: run experiments, compare reports, re-rank saved
//! runs and generate synthetic datasets.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 data or i/o
//! error, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use popdebias::data::{generate_synthetic_with_taste, DataError, Format, PopularityStats, Taste};
use popdebias::experiment::{compare_runs, run_experiment, ExperimentConfig, ExperimentError};
use popdebias::metrics::{MetricError, MetricReport, RecommendationRun};
use popdebias::rerank::{rerank, Method, RerankError, ScoredCandidates};
use popdebias::seed::{self, stream};

#[derive(Parser)]
#[command(
    name = "popdebias",
    version,
    about = "Popularity-bias experiments for implicit-feedback recommenders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config entry, e.g. `--set model.lambda=0.4`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Print a side-by-side table of one or more report CSV files.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Emit CSV instead of a text table.
        #[arg(long)]
        csv: bool,
    },
    /// Re-rank a saved recommendation run.
    Rerank {
        /// Candidate run in JSON lines (e.g. `candidates.jsonl`).
        #[arg(long)]
        run: PathBuf,
        /// pop-weighted, binary-xquad or smooth-xquad.
        #[arg(long)]
        method: Method,
        /// Re-ranking strength in [0, 1]; 0 keeps the candidate order.
        #[arg(long)]
        strength: f64,
        /// Output list length.
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        /// Popularity table; defaults to `popularity.tsv` next to the run.
        #[arg(long)]
        popularity: Option<PathBuf>,
        /// Per-user profile ratios; defaults to `profile_ratio.tsv` next to the run.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic Zipf-skewed interaction log.
    Synth {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        items: usize,
        #[arg(long)]
        skew: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        per_user: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of taste clusters; 1 disables taste structure.
        #[arg(long, default_value_t = 1)]
        clusters: usize,
        /// Weight multiplier for items in a user's own cluster.
        #[arg(long, default_value_t = 1.0)]
        affinity: f64,
        /// Output format; inferred from the extension when omitted.
        #[arg(long)]
        format: Option<Format>,
    },
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl Into<String>) -> Self {
        Self {
            code,
            msg: msg.into(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Self::new(e.exit_code() as u8, e.to_string())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        let code = if matches!(e, DataError::InvalidParameter(_)) {
            1
        } else {
            2
        };
        Self::new(code, e.to_string())
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        Self::new(2, e.to_string())
    }
}

impl From<RerankError> for Failure {
    fn from(e: RerankError) -> Self {
        let code = match e {
            RerankError::InvalidStrength(_) | RerankError::UnknownMethod(_) => 1,
            _ => 2,
        };
        Self::new(code, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(2, format!("cannot read {}: {e}", path.display())))
}

fn sibling(run: &Path, name: &str) -> PathBuf {
    run.parent().unwrap_or(Path::new(".")).join(name)
}

fn parse_profile(text: &str) -> Result<Vec<f64>, Failure> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let bad = || {
            Failure::new(
                2,
                format!("profile line {}: expected `user<TAB>ratio`", idx + 1),
            )
        };
        let (u, r) = line.split_once('\t').ok_or_else(bad)?;
        if u.parse::<usize>().ok() != Some(out.len()) {
            return Err(bad());
        }
        out.push(r.parse().map_err(|_| bad())?);
    }
    Ok(out)
}

fn cmd_run(config: &Path, set: &[String]) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(config).map_err(|e| Failure::new(1, e.to_string()))?;
    cfg.apply_overrides(set.iter().map(String::as_str))
        .map_err(|e| Failure::new(1, e.to_string()))?;
    let reports = run_experiment(&cfg)?;
    for r in &reports {
        log::info!("finished {}", r.treatment);
    }
    println!("{}", cfg.output.join("report.csv").display());
    Ok(())
}

fn cmd_compare(paths: &[PathBuf], csv: bool) -> Result<(), Failure> {
    let mut reports: Vec<MetricReport> = Vec::new();
    for p in paths {
        reports.extend(MetricReport::parse_treatment_csv(&read(p)?)?);
    }
    let table = compare_runs(&reports).map_err(|e| Failure::new(2, e.to_string()))?;
    print!("{}", if csv { table.to_csv() } else { table.render() });
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_rerank(
    run_path: &Path,
    method: Method,
    strength: f64,
    k: usize,
    popularity: Option<PathBuf>,
    profile: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let run = RecommendationRun::from_jsonl(&read(run_path)?)?;
    let pop_path = popularity.unwrap_or_else(|| sibling(run_path, "popularity.tsv"));
    let stats = PopularityStats::parse_tsv(&read(&pop_path)?, run.n_users())?;
    let ratios = match profile {
        Some(p) => parse_profile(&read(&p)?)?,
        None => {
            let p = sibling(run_path, "profile_ratio.tsv");
            if p.is_file() {
                parse_profile(&read(&p)?)?
            } else if method == Method::SmoothXquad {
                return Err(Failure::new(1, "smooth-xquad needs --profile"));
            } else {
                vec![0.5; run.n_users()]
            }
        }
    };
    if ratios.len() != run.n_users() {
        return Err(RerankError::ProfileLength(ratios.len(), run.n_users()).into());
    }
    let mut result = rerank(
        method,
        &ScoredCandidates::from_run(&run),
        &stats,
        &ratios,
        strength,
        k,
    )?;
    for (key, v) in &run.provenance {
        result
            .provenance
            .entry(key.clone())
            .or_insert_with(|| v.clone());
    }
    match out {
        Some(p) => result.write(&p)?,
        None => print!("{}", result.to_jsonl()),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    users: usize,
    items: usize,
    skew: f64,
    out: &Path,
    per_user: usize,
    seed_root: u64,
    taste: Taste,
    format: Option<Format>,
) -> Result<(), Failure> {
    let ds = generate_synthetic_with_taste(
        users,
        items,
        per_user,
        skew,
        taste,
        seed::derive(seed_root, stream::SYNTHETIC),
    )?;
    let format = format.unwrap_or(match out.extension().and_then(|e| e.to_str()) {
        Some("csv") => Format::Csv,
        Some("tsv") => Format::Tsv,
        _ => Format::MovielensDat,
    });
    ds.write(out, format)?;
    log::info!("wrote {} interactions to {}", ds.len(), out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, set } => cmd_run(&config, &set),
        Command::Compare { reports, csv } => cmd_compare(&reports, csv),
        Command::Rerank {
            run,
            method,
            strength,
            k,
            popularity,
            profile,
            out,
        } => cmd_rerank(&run, method, strength, k, popularity, profile, out),
        Command::Synth {
            users,
            items,
            skew,
            out,
            per_user,
            seed,
            clusters,
            affinity,
            format,
        } => cmd_synth(
            users,
            items,
            skew,
            &out,
            per_user,
            seed,
            Taste { clusters, affinity },
            format,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
