//! Flat `key = value` config files with `[section]` headers.
//!
//! Zero-dependency format chosen for diff-friendliness. Every key maps to
//! exactly one field; unknown keys are errors rather than silently-ignored
//! typos. CLI flags override file values; the fully-resolved configuration
//! is echoed into every run journal.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gcn::ClassWeightMode;
use crate::pipeline::{FinalModel, Method, RetrainPolicy, RunConfig};
use crate::select::RankingMode;

/// Parsed file: `section.key → value`, insertion-ordered within a map.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, path)
    }

    pub fn parse_str(text: &str, path: &Path) -> Result<Self> {
        let mut section = String::new();
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            if values.insert(full.clone(), value.trim().to_string()).is_some() {
                return Err(Error::parse(path, lineno + 1, format!("duplicate key `{full}`")));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }
}

/// Dataset file locations, resolvable from a directory layout.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetPaths {
    pub name: String,
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
}

impl DatasetPaths {
    /// Conventional layout: `<dir>/edges.tsv`, `features.bin` (or
    /// `features.csv`), `labels.txt`. The dataset name is the directory name.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let bin = dir.join("features.bin");
        let csv = dir.join("features.csv");
        let features = if bin.exists() {
            bin
        } else if csv.exists() {
            csv
        } else {
            return Err(Error::Config(format!(
                "{}: neither features.bin nor features.csv exists",
                dir.display()
            )));
        };
        Ok(DatasetPaths {
            name: dir
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
            edges: dir.join("edges.tsv"),
            features,
            labels: dir.join("labels.txt"),
        })
    }
}

/// Apply a parsed config file onto a `RunConfig`, rejecting unknown keys.
pub fn apply_config_file(file: &ConfigFile, cfg: &mut RunConfig) -> Result<()> {
    for key in file.keys() {
        let value = file.get(key).unwrap();
        apply_key(cfg, key, value)?;
    }
    Ok(())
}

/// Set one `section.key` on the config. The CLI funnels flag overrides
/// through the same path so both layers accept identical names.
pub fn apply_key(cfg: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    let bad = |what: &str, v: &str| Error::Config(format!("{key}: bad {what} `{v}`"));
    let parse_usize = |v: &str| v.parse::<usize>().map_err(|_| bad("integer", v));
    let parse_f64 = |v: &str| v.parse::<f64>().map_err(|_| bad("real", v));
    let parse_u64 = |v: &str| v.parse::<u64>().map_err(|_| bad("integer", v));
    let parse_bool = |v: &str| match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(bad("bool", v)),
    };
    match key {
        "run.method" => cfg.method = parse_method(value)?,
        "run.rounds" => cfg.rounds = parse_usize(value)?,
        "run.k_prime" => cfg.k_prime = parse_usize(value)?,
        "run.retrain_policy" => {
            cfg.retrain_policy = match value {
                "fresh_init" => RetrainPolicy::FreshInit,
                "warm_start" => RetrainPolicy::WarmStart,
                _ => return Err(bad("retrain policy", value)),
            }
        }
        "run.first_round_epochs" => cfg.first_round_epochs = parse_usize(value)?,
        "run.later_round_epochs" => cfg.later_round_epochs = parse_usize(value)?,
        "run.final_model" => {
            cfg.final_model = match value {
                "best_val_round" => FinalModel::BestValRound,
                "last_round" => FinalModel::LastRound,
                _ => return Err(bad("final model policy", value)),
            }
        }
        "run.normalize_embeddings" => cfg.normalize_embeddings = parse_bool(value)?,
        "dataset.row_normalize_features" => cfg.row_normalize_features = parse_bool(value)?,
        "run.kmeans_max_iters" => cfg.kmeans_max_iters = parse_usize(value)?,
        "run.kmeans_tol" => cfg.kmeans_tol = parse_f64(value)?,
        "run.seed" => cfg.seed = parse_u64(value)?,
        "model.layers" => cfg.model.layers = parse_usize(value)?,
        "model.hidden" => cfg.model.hidden = parse_usize(value)?,
        "model.batchnorm" => cfg.model.batchnorm = parse_bool(value)?,
        "model.bn_momentum" => cfg.model.bn_momentum = parse_f64(value)?,
        "model.lr" => cfg.model.lr = parse_f64(value)?,
        "model.weight_decay" => cfg.model.weight_decay = parse_f64(value)?,
        "model.max_epochs" => cfg.model.max_epochs = parse_usize(value)?,
        "model.patience" => cfg.model.patience = parse_usize(value)?,
        "model.scheduler_window" => cfg.model.scheduler_window = parse_usize(value)?,
        "model.class_weight_mode" => {
            cfg.model.class_weight_mode = match value {
                "none" => ClassWeightMode::None,
                "inverse_frequency" => ClassWeightMode::InverseFrequency,
                _ => return Err(bad("class weight mode", value)),
            }
        }
        "model.bn_stats" => {
            cfg.model.bn_stats = match value {
                "all_nodes" => crate::gcn::BnStats::AllNodes,
                "train_mask" => crate::gcn::BnStats::TrainMask,
                _ => return Err(bad("bn stats mode", value)),
            }
        }
        "selection.alpha" => cfg.selection.alpha = parse_usize(value)?,
        "selection.gamma" => cfg.selection.gamma = parse_f64(value)?,
        "selection.rbo_p" => cfg.selection.rbo_p = parse_f64(value)?,
        "selection.minority_only" => cfg.selection.minority_only = parse_bool(value)?,
        "selection.ranking_mode" => {
            cfg.selection.ranking_mode = match value {
                "confidence" => RankingMode::Confidence,
                "geometric" => RankingMode::Geometric,
                "fused" => RankingMode::Fused,
                _ => return Err(bad("ranking mode", value)),
            }
        }
        "selection.dgin_enabled" => cfg.selection.dgin_enabled = parse_bool(value)?,
        _ => {
            return Err(Error::Config(format!(
                "unknown config key `{key}` (no silent typo absorption)"
            )))
        }
    }
    Ok(())
}

pub fn parse_method(value: &str) -> Result<Method> {
    match value {
        "vanilla" => Ok(Method::Vanilla),
        "reweight" => Ok(Method::Reweight),
        "self_training" | "st" => Ok(Method::SelfTraining),
        "unreal" => Ok(Method::Unreal),
        _ => Err(Error::Config(format!("unknown method `{value}`"))),
    }
}
