use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adam::AdamConfig;
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::model::{ModelConfig, TaConfig, TaVariant};
use crate::objective::Objective;

/// Every hyperparameter of pretraining, finetuning, and evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    /// Transition intensity of the TA layer.
    pub gamma: f64,
    /// Weight of the recommendation loss against the auxiliary losses.
    pub beta: f64,
    pub lambda_reg: f64,
    pub lr: f64,
    pub epochs_pretrain: usize,
    pub epochs_finetune: usize,
    pub batch_size: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
    pub pretrain_loss: LossKind,
    pub finetune_loss: LossKind,
    pub ta_layers: usize,
    pub aux_encoder_layers: usize,
    pub eval_ks: Vec<usize>,
    pub quantization_bins: usize,
    pub ta_variant: TaVariant,
    pub unified_attributes: bool,
    pub uniformity_weight: f64,
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            gamma: 1.0,
            beta: 0.5,
            lambda_reg: 1e-4,
            lr: 0.01,
            epochs_pretrain: 50,
            epochs_finetune: 50,
            batch_size: 256,
            negatives_per_positive: 1,
            seed: 0,
            pretrain_loss: LossKind::Alignment,
            finetune_loss: LossKind::Bpr,
            ta_layers: 1,
            aux_encoder_layers: 1,
            eval_ks: vec![10, 20],
            quantization_bins: 5,
            ta_variant: TaVariant::Full,
            unified_attributes: true,
            uniformity_weight: 1.0,
            train_fraction: 0.8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("dim", self.dim),
            ("batch_size", self.batch_size),
            ("negatives_per_positive", self.negatives_per_positive),
            ("ta_layers", self.ta_layers),
            ("aux_encoder_layers", self.aux_encoder_layers),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.quantization_bins < 2 {
            return Err(Error::InvalidConfig("quantization_bins must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.eval_ks.is_empty() || self.eval_ks.contains(&0) {
            return Err(Error::InvalidConfig("eval_ks must be a non-empty list of K >= 1".into()));
        }
        if self.eval_ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("eval_ks must be strictly ascending".into()));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("lambda_reg", self.lambda_reg),
            ("lr", self.lr),
            ("uniformity_weight", self.uniformity_weight),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            ta: TaConfig {
                gamma: self.gamma,
                num_layers: self.ta_layers,
                variant: self.ta_variant,
            },
            aux_layers: self.aux_encoder_layers,
            unified_attributes: self.unified_attributes,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }

    pub fn pretrain_objective(&self) -> Result<Objective> {
        let mut o = Objective::new(self.pretrain_loss, self.beta, self.lambda_reg)?;
        o.uniformity_weight = self.uniformity_weight;
        Ok(o)
    }

    /// Finetuning optimizes the recommendation loss alone.
    pub fn finetune_objective(&self) -> Result<Objective> {
        let mut o = Objective::new(self.finetune_loss, 1.0, self.lambda_reg)?;
        o.uniformity_weight = self.uniformity_weight;
        Ok(o)
    }

    /// SHA-256 over the canonical TOML rendering of the config.
    pub fn fingerprint(&self) -> [u8; 32] {
        let text = toml::to_string(self).expect("config serializes to TOML");
        Sha256::digest(text.as_bytes()).into()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}
