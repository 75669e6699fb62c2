//! Run configuration: one TOML file with `[data]`, `[model]`, `[train]` and
//! `[output]` sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SastError};
use crate::event_data::SyntheticSpec;
use crate::optim::Method;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Synthetic,
    Directory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    /// Temporal bins per sample.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Generator settings; `samples_per_class` is ignored in favour of the split sizes.
    #[serde(default)]
    pub synthetic: SyntheticSpec,
    #[serde(default = "default_train_per_class")]
    pub train_per_class: usize,
    #[serde(default = "default_eval_per_class")]
    pub val_per_class: usize,
    #[serde(default = "default_eval_per_class")]
    pub test_per_class: usize,
    /// Directory datasets: training root (validation is carved from it).
    #[serde(default)]
    pub train_path: Option<PathBuf>,
    #[serde(default)]
    pub test_path: Option<PathBuf>,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    /// Directory datasets: keep at most this many training samples (0 = all).
    #[serde(default)]
    pub max_train_samples: usize,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_steps() -> usize {
    10
}
fn default_train_per_class() -> usize {
    300
}
fn default_eval_per_class() -> usize {
    100
}
fn default_val_fraction() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_slope")]
    pub slope: f64,
}

fn default_alpha() -> f64 {
    0.5
}
fn default_theta() -> f64 {
    1.0
}
fn default_slope() -> f64 {
    25.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub method: Method,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub rho_grid: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Baseline runs get twice the configured epochs, matching the gradient
    /// evaluations of a sharpness-aware run.
    #[serde(default)]
    pub compute_matched: bool,
}

fn default_rho() -> f64 {
    0.3
}
fn default_delta() -> f64 {
    1e-12
}
fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_batch() -> usize {
    128
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputConfig,
}

fn field(name: &str, msg: impl std::fmt::Display) -> SastError {
    SastError::invalid(format!("field `{name}`: {msg}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| SastError::invalid(format!("config: {e}")))?;
        Ok(cfg)
    }

    /// Reads and validates a config. Relative dataset paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SastError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.train_path, &mut cfg.data.test_path]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SastError::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.steps == 0 {
            return Err(field("data.steps", "must be at least 1"));
        }
        match d.kind {
            DataKind::Synthetic => {
                let mut s = d.synthetic.clone();
                s.samples_per_class = 1;
                s.validate().map_err(|e| field("data.synthetic", e))?;
                if d.train_per_class == 0 || d.val_per_class == 0 {
                    return Err(field("data.train_per_class/val_per_class", "must be positive"));
                }
            }
            DataKind::Directory => {
                let train = d
                    .train_path
                    .as_ref()
                    .ok_or_else(|| field("data.train_path", "required for directory datasets"))?;
                if !train.is_dir() {
                    return Err(field(
                        "data.train_path",
                        format!("{} is not a directory", train.display()),
                    ));
                }
                if let Some(t) = &d.test_path {
                    if !t.is_dir() {
                        return Err(field("data.test_path", format!("{} is not a directory", t.display())));
                    }
                }
                if !(d.val_fraction > 0.0 && d.val_fraction < 1.0) {
                    return Err(field("data.val_fraction", "must be in (0, 1)"));
                }
            }
        }
        let m = &self.model;
        if m.hidden.is_empty() || m.hidden.contains(&0) {
            return Err(field("model.hidden", "needs at least one non-zero layer width"));
        }
        if !(m.alpha > 0.0 && m.alpha < 1.0) {
            return Err(field("model.alpha", "must be in (0, 1)"));
        }
        if !(m.theta > 0.0) {
            return Err(field("model.theta", "must be positive"));
        }
        if !(m.slope > 0.0) {
            return Err(field("model.slope", "must be positive"));
        }
        let t = &self.train;
        if !(t.rho >= 0.0) {
            return Err(field("train.rho", "must be non-negative"));
        }
        if t.rho_grid.iter().any(|r| !(*r >= 0.0)) {
            return Err(field("train.rho_grid", "entries must be non-negative"));
        }
        if !(t.delta > 0.0) {
            return Err(field("train.delta", "must be positive"));
        }
        if !(t.lr > 0.0) {
            return Err(field("train.lr", "must be positive"));
        }
        if !(0.0..1.0).contains(&t.beta1) || !(0.0..1.0).contains(&t.beta2) {
            return Err(field("train.beta1/beta2", "must be in [0, 1)"));
        }
        if t.batch_size == 0 {
            return Err(field("train.batch_size", "must be positive"));
        }
        if t.seeds.is_empty() {
            return Err(field("train.seeds", "needs at least one seed"));
        }
        Ok(())
    }
}
