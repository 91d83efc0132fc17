//! JSON experiment configuration.
//!
//! Unknown keys are rejected. Relative paths are resolved against the
//! directory that holds the config file.

use std::fs;
use std::path::{Path, PathBuf};

use maxsep_core::data::OodKind;
use maxsep_core::nn::{HeadKind, OptimizerConfig};
use maxsep_core::Radius;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default = "default_factors")]
    pub imbalance_factors: Vec<f64>,
    pub heads: Vec<HeadKind>,
    pub network: NetworkSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub rho: Radius,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood: Option<OodSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osr: Option<OsrSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Blobs {
        num_classes: usize,
        dim: usize,
        /// Per-class training pool; the long-tail profile starts from this count.
        train_per_class: usize,
        test_per_class: usize,
        mean_scale: f64,
        noise_std: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// Hidden widths between the input and the penultimate features.
    pub hidden: Vec<usize>,
    /// Penultimate width for `standard_linear`; the other heads always use
    /// `num_classes - 1`. Defaults to `num_classes - 1` as well.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OodSetSpec {
    pub name: String,
    pub n: usize,
    pub generator: OodKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OodSpec {
    pub sets: Vec<OodSetSpec>,
    /// When false, reuse the checkpoints `train` wrote at imbalance factor 1.0.
    #[serde(default = "default_true")]
    pub train: bool,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Ridge added to the shared Mahalanobis covariance; scale-aware default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mahalanobis_epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OsrSpec {
    pub known_classes: Vec<usize>,
}

fn default_factors() -> Vec<f64> {
    vec![1.0]
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_true() -> bool {
    true
}

fn default_temperature() -> f64 {
    1.0
}

impl DatasetSpec {
    pub fn num_classes(&self) -> Option<usize> {
        match self {
            DatasetSpec::Blobs { num_classes, .. } => Some(*num_classes),
            DatasetSpec::Idx { .. } => None,
        }
    }
}

impl ExperimentConfig {
    /// Read, parse, resolve relative paths and validate.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|message| CliError::config(path, message))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate().map_err(|message| CliError::config(path, message))?;
        Ok(cfg)
    }

    /// Parse only. Errors carry serde's line/column and the offending field.
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } = &mut self.dataset
        {
            fix(train_images);
            fix(train_labels);
            fix(test_images);
            fix(test_labels);
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.heads.is_empty() {
            return Err("heads: list is empty".into());
        }
        if self.seeds.is_empty() {
            return Err("seeds: list is empty".into());
        }
        if self.imbalance_factors.is_empty() {
            return Err("imbalance_factors: list is empty".into());
        }
        for &f in &self.imbalance_factors {
            if !(f > 0.0 && f <= 1.0) {
                return Err(format!("imbalance_factors: {f} is outside (0, 1]"));
            }
        }
        if self.batch_size == 0 {
            return Err("batch_size: must be >= 1".into());
        }
        if self.network.hidden.contains(&0) {
            return Err("network.hidden: zero-width layer".into());
        }
        if self.network.feature_dim == Some(0) {
            return Err("network.feature_dim: must be >= 1".into());
        }
        self.optimizer
            .validate()
            .map_err(|e| format!("optimizer: {e}"))?;
        if let DatasetSpec::Blobs {
            num_classes,
            dim,
            train_per_class,
            test_per_class,
            mean_scale,
            noise_std,
        } = &self.dataset
        {
            if *num_classes < 2 {
                return Err("dataset.num_classes: need at least 2".into());
            }
            if *dim < 2 || *train_per_class == 0 || *test_per_class == 0 {
                return Err("dataset: dim must be >= 2 and per-class counts >= 1".into());
            }
            if *mean_scale <= 0.0 || mean_scale.is_nan() || *noise_std < 0.0 || noise_std.is_nan() {
                return Err("dataset: mean_scale must be > 0 and noise_std >= 0".into());
            }
        }
        if let Some(ood) = &self.ood {
            if ood.sets.is_empty() {
                return Err("ood.sets: list is empty".into());
            }
            if let Some(set) = ood.sets.iter().find(|s| s.n == 0) {
                return Err(format!("ood.sets: set '{}' is empty", set.name));
            }
            if !(ood.temperature > 0.0 && ood.temperature.is_finite()) {
                return Err("ood.temperature: must be > 0".into());
            }
            let mut names: Vec<&str> = ood.sets.iter().map(|s| s.name.as_str()).collect();
            names.sort_unstable();
            if names.windows(2).any(|w| w[0] == w[1]) {
                return Err("ood.sets: duplicate set name".into());
            }
        }
        if let Some(osr) = &self.osr {
            let mut known = osr.known_classes.clone();
            known.sort_unstable();
            known.dedup();
            if known.len() != osr.known_classes.len() {
                return Err("osr.known_classes: duplicate class".into());
            }
            if known.len() < 2 {
                return Err("osr.known_classes: need at least 2 known classes".into());
            }
            if let Some(c) = self.dataset.num_classes() {
                if let Some(bad) = known.iter().find(|&&k| k >= c) {
                    return Err(format!("osr.known_classes: class {bad} out of range for {c} classes"));
                }
                if known.len() == c {
                    return Err("osr.known_classes: every class is known, leaving no open set".into());
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of the config. `output_dir`, `seeds`
    /// and `heads` are left out: they only pick which runs to execute, and
    /// seed and head each get their own directory level.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut value {
            for key in ["output_dir", "seeds", "heads"] {
                map.remove(key);
            }
        }
        // serde_json maps are sorted by key, so this text is canonical.
        let text = serde_json::to_string(&value).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Hash of a single classification run: the config narrowed to one
    /// imbalance factor, so runs at different factors land in different
    /// directories.
    pub fn run_hash(&self, factor: f64) -> String {
        let mut narrowed = self.clone();
        narrowed.imbalance_factors = vec![factor];
        narrowed.hash()
    }

    /// Hash for a protocol other than plain classification.
    pub fn protocol_hash(&self, protocol: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(protocol.as_bytes());
        hasher.update([0]);
        hasher.update(self.hash().as_bytes());
        hex::encode(hasher.finalize())
    }
}
