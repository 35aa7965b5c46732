//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected so that typos fail loudly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::ConfigError;
use crate::data::{Format, Taste};
use crate::model::TrainConfig;
use crate::rerank::{Method, DEFAULT_CANDIDATES};
use crate::sampling::SamplerKind;

/// Which of the four training treatments to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Treatment {
    /// Uniform negatives, no penalty.
    Base,
    /// Popularity-balanced negatives, no penalty.
    Sam,
    /// Uniform negatives with the correlation penalty.
    Reg,
    /// Balanced negatives with the correlation penalty.
    SamReg,
}

impl Treatment {
    pub const ALL: [Treatment; 4] = [
        Treatment::Base,
        Treatment::Sam,
        Treatment::Reg,
        Treatment::SamReg,
    ];

    pub fn sampler(self) -> SamplerKind {
        match self {
            Treatment::Base | Treatment::Reg => SamplerKind::Standard,
            Treatment::Sam | Treatment::SamReg => SamplerKind::Balanced,
        }
    }

    pub fn regularized(self) -> bool {
        matches!(self, Treatment::Reg | Treatment::SamReg)
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Treatment::Base => "base",
            Treatment::Sam => "sam",
            Treatment::Reg => "reg",
            Treatment::SamReg => "sam+reg",
        })
    }
}

impl FromStr for Treatment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "base" => Ok(Treatment::Base),
            "sam" => Ok(Treatment::Sam),
            "reg" => Ok(Treatment::Reg),
            "sam+reg" | "samreg" | "sam_reg" => Ok(Treatment::SamReg),
            _ => Err(ConfigError::Invalid {
                key: "treatment".into(),
                msg: format!("unknown treatment `{s}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    File {
        path: PathBuf,
        format: Format,
    },
    Synthetic {
        users: usize,
        items: usize,
        per_user: usize,
        skew: f64,
        taste: Taste,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub test_ratio: f64,
    pub balanced_m: usize,
    /// Root seed for every named random stream.
    pub seed: u64,
    pub treatment: Treatment,
    /// Model hyperparameters; `sampler` is overwritten by the treatment.
    pub train: TrainConfig<f64>,
    pub cutoffs: Vec<usize>,
    pub rerankers: Vec<(Method, f64)>,
    /// Also evaluate the Random and MostPop reference recommenders.
    pub baselines: bool,
    pub candidates: usize,
    pub samples_per_cell: usize,
    pub pairs_per_user: usize,
    /// When non-empty, one run per λ instead of a single run.
    pub lambda_sweep: Vec<f64>,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::Synthetic {
                users: 2000,
                items: 1000,
                per_user: 40,
                skew: 1.2,
                taste: Taste {
                    clusters: 10,
                    affinity: 20.0,
                },
            },
            test_ratio: 0.2,
            balanced_m: 1,
            seed: 0,
            treatment: Treatment::Base,
            train: TrainConfig::default(),
            cutoffs: vec![10],
            rerankers: Vec::new(),
            baselines: false,
            candidates: DEFAULT_CANDIDATES,
            samples_per_cell: 10_000,
            pairs_per_user: 5,
            lambda_sweep: Vec::new(),
            output: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::Invalid {
        key: key.to_string(),
        msg: format!("cannot parse `{v}`"),
    })
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut pairs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: idx + 1 })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        cfg.apply(pairs)?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides, e.g. from `--set` flags.
    pub fn apply_overrides<'a>(
        &mut self,
        sets: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), ConfigError> {
        let mut pairs = Vec::new();
        for s in sets {
            let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Invalid {
                key: s.to_string(),
                msg: "expected key=value".into(),
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        self.apply(pairs)
    }

    fn apply(&mut self, pairs: Vec<(String, String)>) -> Result<(), ConfigError> {
        // Dataset keys are collected first because path and synthetic
        // parameters are mutually exclusive.
        let mut path: Option<PathBuf> = None;
        let mut format: Option<Format> = None;
        let (mut users, mut items, mut per_user, mut skew, mut taste) = match &self.dataset {
            DatasetSpec::Synthetic {
                users,
                items,
                per_user,
                skew,
                taste,
            } => (*users, *items, *per_user, *skew, *taste),
            DatasetSpec::File { path: p, format: f } => {
                path = Some(p.clone());
                format = Some(*f);
                (
                    2000,
                    1000,
                    40,
                    1.2,
                    Taste {
                        clusters: 10,
                        affinity: 20.0,
                    },
                )
            }
        };
        let mut synthetic_touched = false;

        for (k, v) in pairs {
            let key = k.as_str();
            match key {
                "dataset.path" => path = Some(PathBuf::from(&v)),
                "dataset.format" => {
                    format = Some(v.parse().map_err(|e: crate::data::DataError| {
                        ConfigError::Invalid {
                            key: k.clone(),
                            msg: e.to_string(),
                        }
                    })?)
                }
                "synthetic.users" => {
                    users = parse_num(key, &v)?;
                    synthetic_touched = true;
                }
                "synthetic.items" => {
                    items = parse_num(key, &v)?;
                    synthetic_touched = true;
                }
                "synthetic.per_user" => {
                    per_user = parse_num(key, &v)?;
                    synthetic_touched = true;
                }
                "synthetic.skew" => {
                    skew = parse_num(key, &v)?;
                    synthetic_touched = true;
                }
                "synthetic.clusters" => {
                    taste.clusters = parse_num(key, &v)?;
                    synthetic_touched = true;
                }
                "synthetic.affinity" => {
                    taste.affinity = parse_num(key, &v)?;
                    synthetic_touched = true;
                }
                "split.test_ratio" => self.test_ratio = parse_num(key, &v)?,
                "split.balanced_m" => self.balanced_m = parse_num(key, &v)?,
                "seed" => self.seed = parse_num(key, &v)?,
                "treatment" => self.treatment = v.parse()?,
                "model.objective" => {
                    self.train.objective = v.parse().map_err(|msg| ConfigError::Invalid {
                        key: k.clone(),
                        msg,
                    })?
                }
                "model.dim" => self.train.dim = parse_num(key, &v)?,
                "model.learning_rate" => self.train.learning_rate = parse_num(key, &v)?,
                "model.l2" => self.train.l2 = parse_num(key, &v)?,
                "model.lambda" => self.train.lambda = parse_num(key, &v)?,
                "model.t" => self.train.t = parse_num(key, &v)?,
                "model.batch_size" => self.train.batch_size = parse_num(key, &v)?,
                "model.epochs" => self.train.epochs = parse_num(key, &v)?,
                "cutoffs" => self.cutoffs = parse_list(key, &v)?,
                "rerankers" => {
                    self.rerankers = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            let (m, st) =
                                s.split_once(':').ok_or_else(|| ConfigError::Invalid {
                                    key: k.clone(),
                                    msg: format!("expected method:strength, got `{s}`"),
                                })?;
                            let method = m.parse().map_err(|e: crate::rerank::RerankError| {
                                ConfigError::Invalid {
                                    key: k.clone(),
                                    msg: e.to_string(),
                                }
                            })?;
                            Ok((method, parse_num(key, st)?))
                        })
                        .collect::<Result<_, ConfigError>>()?
                }
                "baselines" => self.baselines = parse_num(key, &v)?,
                "rerank.candidates" => self.candidates = parse_num(key, &v)?,
                "diagnostics.samples_per_cell" => self.samples_per_cell = parse_num(key, &v)?,
                "diagnostics.pairs_per_user" => self.pairs_per_user = parse_num(key, &v)?,
                "sweep.lambda" => self.lambda_sweep = parse_list(key, &v)?,
                "output" => self.output = PathBuf::from(&v),
                _ => return Err(ConfigError::UnknownKey(k)),
            }
        }

        self.dataset = match path {
            Some(path) if !synthetic_touched => DatasetSpec::File {
                format: format.unwrap_or_else(|| guess_format(&path)),
                path,
            },
            Some(_) => {
                return Err(ConfigError::Invalid {
                    key: "dataset.path".into(),
                    msg: "cannot combine a dataset path with synthetic.* parameters".into(),
                })
            }
            None => DatasetSpec::Synthetic {
                users,
                items,
                per_user,
                skew,
                taste,
            },
        };
        Ok(())
    }

    /// Checks cross-field rules and returns the effective training config.
    pub fn validate(&self) -> Result<TrainConfig<f64>, ConfigError> {
        let invalid = |key: &str, msg: String| {
            Err(ConfigError::Invalid {
                key: key.into(),
                msg,
            })
        };
        if !(self.test_ratio > 0.0 && self.test_ratio < 1.0) {
            return invalid(
                "split.test_ratio",
                format!("must lie in (0, 1), got {}", self.test_ratio),
            );
        }
        if self.balanced_m == 0 {
            return invalid("split.balanced_m", "must be ≥ 1".into());
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return invalid("cutoffs", "need at least one positive cutoff".into());
        }
        if let Some(&(_, s)) = self.rerankers.iter().find(|r| !(0.0..=1.0).contains(&r.1)) {
            return invalid("rerankers", format!("strength {s} outside [0, 1]"));
        }
        let max_k = *self.cutoffs.iter().max().expect("non-empty");
        if !self.rerankers.is_empty() && self.candidates < max_k {
            return invalid(
                "rerank.candidates",
                format!("pool {} smaller than cutoff {max_k}", self.candidates),
            );
        }
        if self.lambda_sweep.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return invalid("sweep.lambda", "values must lie in [0, 1]".into());
        }
        let lambda = self.train.lambda;
        if self.lambda_sweep.is_empty() && self.treatment.regularized() && !(lambda > 0.0) {
            return invalid(
                "model.lambda",
                format!("treatment {} needs lambda > 0", self.treatment),
            );
        }
        let eff = self.effective_train(if self.treatment.regularized() {
            lambda
        } else {
            0.0
        });
        eff.validate().map_err(|e| ConfigError::Invalid {
            key: "model".into(),
            msg: e.to_string(),
        })?;
        Ok(eff)
    }

    /// Training config with the treatment's sampler and the given λ.
    pub fn effective_train(&self, lambda: f64) -> TrainConfig<f64> {
        TrainConfig {
            sampler: self.treatment.sampler(),
            lambda,
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Every setting as `key → value`, in key order.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        match &self.dataset {
            DatasetSpec::File { path, format } => {
                m.insert("dataset.path".into(), path.display().to_string());
                m.insert("dataset.format".into(), format.to_string());
            }
            DatasetSpec::Synthetic {
                users,
                items,
                per_user,
                skew,
                taste,
            } => {
                m.insert("synthetic.clusters".into(), taste.clusters.to_string());
                m.insert("synthetic.affinity".into(), taste.affinity.to_string());
                m.insert("synthetic.users".into(), users.to_string());
                m.insert("synthetic.items".into(), items.to_string());
                m.insert("synthetic.per_user".into(), per_user.to_string());
                m.insert("synthetic.skew".into(), skew.to_string());
            }
        }
        m.insert("split.test_ratio".into(), self.test_ratio.to_string());
        m.insert("split.balanced_m".into(), self.balanced_m.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("treatment".into(), self.treatment.to_string());
        m.insert("model.objective".into(), self.train.objective.to_string());
        m.insert("model.dim".into(), self.train.dim.to_string());
        m.insert(
            "model.learning_rate".into(),
            self.train.learning_rate.to_string(),
        );
        m.insert("model.l2".into(), self.train.l2.to_string());
        m.insert("model.lambda".into(), self.train.lambda.to_string());
        m.insert("model.t".into(), self.train.t.to_string());
        m.insert("model.batch_size".into(), self.train.batch_size.to_string());
        m.insert("model.epochs".into(), self.train.epochs.to_string());
        m.insert("cutoffs".into(), join(&self.cutoffs));
        let rr: Vec<String> = self
            .rerankers
            .iter()
            .map(|(m, s)| format!("{m}:{s}"))
            .collect();
        m.insert("rerankers".into(), rr.join(","));
        m.insert("baselines".into(), self.baselines.to_string());
        m.insert("rerank.candidates".into(), self.candidates.to_string());
        m.insert(
            "diagnostics.samples_per_cell".into(),
            self.samples_per_cell.to_string(),
        );
        m.insert(
            "diagnostics.pairs_per_user".into(),
            self.pairs_per_user.to_string(),
        );
        m.insert("sweep.lambda".into(), join(&self.lambda_sweep));
        m.insert("output".into(), self.output.display().to_string());
        m
    }

    /// Renders the snapshot in the same `key = value` syntax [`parse`](Self::parse) reads.
    pub fn render(&self) -> String {
        self.snapshot()
            .into_iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn guess_format(path: &std::path::Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Format::Csv,
        Some("tsv") => Format::Tsv,
        _ => Format::MovielensDat,
    }
}
