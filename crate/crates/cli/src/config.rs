//! Config file schema. Every file is TOML with a `schema_version` key; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use altupdate::harness::EvalDistribution;
use altupdate::nn::{Architecture, XavierForm};
use altupdate::optim::{Family, OptimizerSpec, RuleKind, DEFAULT_GAMMA};
use altupdate::tuner::RateGrids;
use altupdate::TaskConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

/// Which optimizer family and update rule to tune.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    pub family: Family,
    pub rule: RuleKind,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

/// A grid search whose winner feeds another command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tuning {
    pub task: TaskConfig,
    pub search: SearchSpec,
    #[serde(default)]
    pub grids: RateGrids,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub schema_version: u32,
    pub task: TaskConfig,
    pub search: SearchSpec,
    #[serde(default)]
    pub grids: RateGrids,
}

impl TuneConfig {
    pub fn tuning(&self) -> Tuning {
        Tuning {
            task: self.task,
            search: self.search,
            grids: self.grids,
        }
    }
}

/// Exactly one of the three ways to name the optimizer under test.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSource {
    /// Explicit spec.
    pub optimizer: Option<OptimizerSpec>,
    /// A `best.json` written by `tune`, relative to the config file.
    pub spec_file: Option<PathBuf>,
    /// Tune first, then use the winner.
    pub tuning: Option<Tuning>,
}

#[derive(Debug, Clone)]
pub enum ResolvedSource {
    Explicit(OptimizerSpec),
    Tuning(Tuning),
}

impl OptimizerSource {
    pub fn resolve(&self, config_dir: &Path) -> Result<ResolvedSource, CliError> {
        let given = [self.optimizer.is_some(), self.spec_file.is_some(), self.tuning.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(CliError::config(
                "exactly one of `optimizer`, `spec_file` or `tuning` must be given",
            ));
        }
        if let Some(spec) = self.optimizer {
            spec.validate().map_err(|e| CliError::config(format!("field `optimizer`: {e}")))?;
            return Ok(ResolvedSource::Explicit(spec));
        }
        if let Some(tuning) = self.tuning {
            return Ok(ResolvedSource::Tuning(tuning));
        }
        let path = config_dir.join(self.spec_file.as_ref().expect("checked above"));
        read_spec_file(&path).map(ResolvedSource::Explicit)
    }
}

fn read_spec_file(path: &Path) -> Result<OptimizerSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("field `spec_file` ({}): {e}", path.display())))?;
    let spec_value = value.get("best_spec").cloned().unwrap_or(value);
    let spec: OptimizerSpec = serde_json::from_value(spec_value)
        .map_err(|e| CliError::config(format!("field `spec_file` ({}): {e}", path.display())))?;
    spec.validate()
        .map_err(|e| CliError::config(format!("field `spec_file` ({}): {e}", path.display())))?;
    Ok(spec)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub schema_version: u32,
    /// Defaults to the tuning task when the optimizer comes from `tuning`.
    pub task: Option<TaskConfig>,
    pub optimizer: Option<OptimizerSpec>,
    pub spec_file: Option<PathBuf>,
    pub tuning: Option<Tuning>,
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    pub schema_version: u32,
    #[serde(default = "default_trials")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub distribution: EvalDistribution,
    pub optimizer: Option<OptimizerSpec>,
    pub spec_file: Option<PathBuf>,
    pub tuning: Option<Tuning>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub schema_version: u32,
    pub task: Option<TaskConfig>,
    /// Range of the first starting coordinate; defaults to ±20% around the task start.
    pub x1_range: Option<[f64; 2]>,
    pub x2_range: Option<[f64; 2]>,
    pub optimizer: Option<OptimizerSpec>,
    pub spec_file: Option<PathBuf>,
    pub tuning: Option<Tuning>,
}

macro_rules! source_of {
    ($cfg:expr) => {
        OptimizerSource {
            optimizer: $cfg.optimizer,
            spec_file: $cfg.spec_file.clone(),
            tuning: $cfg.tuning,
        }
    };
}

impl TrialConfig {
    pub fn source(&self) -> OptimizerSource {
        source_of!(self)
    }
}

impl RobustnessConfig {
    pub fn source(&self) -> OptimizerSource {
        source_of!(self)
    }
}

impl ScanConfig {
    pub fn source(&self) -> OptimizerSource {
        source_of!(self)
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub n: usize,
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LabelledSpec {
    pub label: String,
    pub optimizer: OptimizerSpec,
}

fn default_runs() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub schema_version: u32,
    /// Master seed of the randomized gain/epoch draws.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub batch_size: usize,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub architecture: Architecture,
    #[serde(default)]
    pub init: XavierForm,
    pub optimizers: Vec<LabelledSpec>,
}

impl ToyConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.runs == 0 {
            return Err(CliError::config("field `runs`: must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(CliError::config("field `batch_size`: must be at least 1"));
        }
        if self.optimizers.is_empty() {
            return Err(CliError::config("field `optimizers`: at least one entry is required"));
        }
        if self.architecture.hidden.contains(&0) {
            return Err(CliError::config("field `architecture.hidden`: widths must be positive"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.optimizers {
            let ok = !o.label.is_empty()
                && o.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            if !ok {
                return Err(CliError::config(format!(
                    "field `optimizers.label`: `{}` must be non-empty ASCII letters, digits, '-' or '_'",
                    o.label
                )));
            }
            if !seen.insert(o.label.as_str()) {
                return Err(CliError::config(format!("field `optimizers.label`: duplicate `{}`", o.label)));
            }
            o.optimizer
                .validate()
                .map_err(|e| CliError::config(format!("field `optimizers.optimizer` ({}): {e}", o.label)))?;
        }
        Ok(())
    }
}

/// Read and parse a config, checking its schema version.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, path)
}

pub fn parse<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, CliError> {
    let located = |e: toml::de::Error| CliError::config(format!("{}: {}", path.display(), e.to_string().trim_end()));
    let table: toml::Table = toml::from_str(text).map_err(located)?;
    match table.get("schema_version") {
        Some(toml::Value::Integer(v)) if *v == i64::from(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(CliError::config(format!(
                "{}: field `schema_version`: unsupported value {other}, expected {SCHEMA_VERSION}",
                path.display()
            )))
        }
        None => {
            return Err(CliError::config(format!(
                "{}: missing field `schema_version`",
                path.display()
            )))
        }
    }
    toml::from_str(text).map_err(located)
}
