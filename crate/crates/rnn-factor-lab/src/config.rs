//! Run configuration: a strict JSON file with exactly the documented fields.
//! Unknown keys are rejected so hyperparameter typos fail fast instead of
//! silently training with defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use rnn_factor_core::cells::CellConfig;
use rnn_factor_core::model::ModelConfig;
use rnn_factor_core::optim::AdagradConfig;

use crate::vocab::TokenMode;
use crate::{LabError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    pub data: DataSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub embed_dim: usize,
    pub layers: Vec<LayerSection>,
    pub unroll_length: usize,
    pub batch_size: usize,
}

/// One recurrent layer. `kind` selects the variant; `rank` is required for
/// `factorized`, `groups` for `grouped`, and neither is accepted elsewhere.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSection {
    pub cell_dim: usize,
    pub kind: String,
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default)]
    pub groups: Option<usize>,
}

impl LayerSection {
    pub fn to_cell_config(&self, embed_dim: usize) -> Result<CellConfig> {
        match self.kind.as_str() {
            "dense" => {
                if self.rank.is_some() || self.groups.is_some() {
                    return Err(LabError::config(
                        "dense layers take neither 'rank' nor 'groups'",
                    ));
                }
                Ok(CellConfig::dense(embed_dim, self.cell_dim))
            }
            "factorized" => {
                if self.groups.is_some() {
                    return Err(LabError::config("factorized layers do not take 'groups'"));
                }
                let rank = self
                    .rank
                    .ok_or_else(|| LabError::config("factorized layers require 'rank'"))?;
                Ok(CellConfig::factorized(embed_dim, self.cell_dim, rank))
            }
            "grouped" => {
                if self.rank.is_some() {
                    return Err(LabError::config("grouped layers do not take 'rank'"));
                }
                let groups = self
                    .groups
                    .ok_or_else(|| LabError::config("grouped layers require 'groups'"))?;
                Ok(CellConfig::grouped(embed_dim, self.cell_dim, groups))
            }
            other => Err(LabError::config(format!(
                "unknown layer kind '{other}' (expected dense, factorized or grouped)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Global-norm clipping threshold; JSON `null` disables clipping.
    #[serde(default = "default_clip_norm")]
    pub clip_norm: Option<f64>,
    #[serde(default = "default_initial_accumulator")]
    pub initial_accumulator: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_learning_rate() -> f64 {
    0.2
}

fn default_clip_norm() -> Option<f64> {
    Some(1.0)
}

fn default_initial_accumulator() -> f64 {
    0.1
}

fn default_epsilon() -> f64 {
    1e-10
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            learning_rate: default_learning_rate(),
            clip_norm: default_clip_norm(),
            initial_accumulator: default_initial_accumulator(),
            epsilon: default_epsilon(),
        }
    }
}

impl OptimizerSection {
    pub fn to_adagrad_config(&self) -> Result<AdagradConfig> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(LabError::config("learning_rate must be positive"));
        }
        if self.initial_accumulator < 0.0 {
            return Err(LabError::config("initial_accumulator must be non-negative"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) || !c.is_finite() {
                return Err(LabError::config("clip_norm must be positive"));
            }
        }
        Ok(AdagradConfig {
            learning_rate: self.learning_rate,
            epsilon: self.epsilon,
            initial_accumulator: self.initial_accumulator,
            clip_norm: self.clip_norm,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub corpus: PathBuf,
    pub mode: TokenMode,
    pub max_vocab: usize,
    /// Tail fraction of the token stream reserved for held-out evaluation
    /// (scored with zero-state resets per sentence); 0 disables it.
    #[serde(default = "default_holdout_fraction")]
    pub holdout_fraction: f64,
}

fn default_holdout_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: u64,
    #[serde(default)]
    pub metrics_path: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint_path: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint_interval: Option<u64>,
    /// Resume training from this checkpoint instead of a fresh init.
    #[serde(default)]
    pub resume_from: Option<PathBuf>,
}

fn default_eval_interval() -> u64 {
    50
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| LabError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| LabError::config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.run.eval_interval == 0 {
            return Err(LabError::config("eval_interval must be positive"));
        }
        if !(0.0..1.0).contains(&self.data.holdout_fraction) {
            return Err(LabError::config("holdout_fraction must lie in [0, 1)"));
        }
        if let Some(0) = self.checkpoint_every() {
            return Err(LabError::config("checkpoint_interval must be positive"));
        }
        if self.run.checkpoint_interval.is_some() && self.run.checkpoint_path.is_none() {
            return Err(LabError::config(
                "checkpoint_interval requires checkpoint_path",
            ));
        }
        self.optimizer.to_adagrad_config()?;
        // Model dimensions are validated against the vocabulary later, but
        // the parts that do not depend on it can fail early.
        for layer in &self.model.layers {
            layer.to_cell_config(self.model.embed_dim)?.validate()?;
        }
        if self.model.unroll_length == 0 || self.model.batch_size == 0 {
            return Err(LabError::config(
                "unroll_length and batch_size must be positive",
            ));
        }
        Ok(())
    }

    pub fn checkpoint_every(&self) -> Option<u64> {
        self.run.checkpoint_interval
    }

    /// Full model config once the vocabulary size is known.
    pub fn to_model_config(&self, vocab_size: usize) -> Result<ModelConfig> {
        let layers = self
            .model
            .layers
            .iter()
            .map(|l| l.to_cell_config(self.model.embed_dim))
            .collect::<Result<Vec<_>>>()?;
        let config = ModelConfig {
            vocab_size,
            embed_dim: self.model.embed_dim,
            layers,
            unroll: self.model.unroll_length,
            batch: self.model.batch_size,
        };
        config.validate()?;
        Ok(config)
    }
}
