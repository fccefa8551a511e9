//! TOML pipeline configuration: one section per pipeline stage, a global
//! seed, and an output root. Unknown keys anywhere are rejected so typos
//! fail loudly instead of silently running defaults.

use std::fs;
use std::path::{Path, PathBuf};

use chartab_core::objectives::DEFAULT_MASK_RATE;
use chartab_core::{NoiseModel, ObjectiveSelector, SpecConfig, TableGenConfig};
use chartab_model::{ModelConfig, TrainOptions};
use serde::Deserialize;

use crate::{validation, CliError};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Global seed; the `--seed` flag overrides it.
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub table_gen: TableGenConfig,
    pub chart: SpecConfig,
    pub ocr_noise: NoiseModel,
    pub objectives: ObjectivesSection,
    pub model: ModelSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectivesSection {
    pub objective: ObjectiveChoice,
    pub rate: f64,
    /// OCR sentinel budget per sample.
    pub max_ocr: usize,
}

impl Default for ObjectivesSection {
    fn default() -> Self {
        ObjectivesSection {
            objective: ObjectiveChoice::Alternate,
            rate: DEFAULT_MASK_RATE,
            max_ocr: chartab_core::stc::DEFAULT_MAX_OCR,
        }
    }
}

/// Which masking objective a run applies per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveChoice {
    /// Header masking on even sample indices, value masking on odd ones.
    Alternate,
    /// Masked header prediction on every sample.
    Mhp,
    /// Masked value prediction on every sample.
    Mvp,
}

impl ObjectiveChoice {
    pub fn selector(self) -> ObjectiveSelector {
        match self {
            ObjectiveChoice::Alternate => ObjectiveSelector::Alternate,
            ObjectiveChoice::Mhp => ObjectiveSelector::Weighted { mhp: 1.0 },
            ObjectiveChoice::Mvp => ObjectiveSelector::Weighted { mhp: 0.0 },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub d_ff: usize,
    pub d_region: usize,
    pub n_buckets: usize,
    pub max_distance: usize,
    pub max_input_len: usize,
    pub max_target_len: usize,
    pub steps: usize,
    pub lr: f64,
    pub momentum: f64,
    pub final_lr_fraction: f64,
    pub n_train: usize,
    pub n_heldout: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::micro(5, 0);
        ModelSection {
            d_model: m.d_model,
            n_heads: m.n_heads,
            n_enc_layers: m.n_enc_layers,
            n_dec_layers: m.n_dec_layers,
            d_ff: m.d_ff,
            d_region: m.d_region,
            n_buckets: m.n_buckets,
            max_distance: m.max_distance,
            max_input_len: m.max_input_len,
            max_target_len: m.max_target_len,
            steps: 8000,
            lr: 0.05,
            momentum: 0.9,
            final_lr_fraction: 0.05,
            n_train: 200,
            n_heldout: 50,
        }
    }
}

impl ModelSection {
    /// Dimensions for a concrete vocabulary; validated by the model crate.
    pub fn model_config(&self, vocab_size: usize, n_ocr: usize) -> ModelConfig {
        ModelConfig {
            d_model: self.d_model,
            n_heads: self.n_heads,
            n_enc_layers: self.n_enc_layers,
            n_dec_layers: self.n_dec_layers,
            d_ff: self.d_ff,
            d_region: self.d_region,
            n_buckets: self.n_buckets,
            max_distance: self.max_distance,
            max_input_len: self.max_input_len,
            max_target_len: self.max_target_len,
            vocab_size,
            n_ocr,
        }
    }

    pub fn train_options(&self, seed: u64) -> TrainOptions {
        TrainOptions {
            steps: self.steps,
            lr: self.lr,
            momentum: self.momentum,
            seed,
            final_lr_fraction: self.final_lr_fraction,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Case-sensitive text comparison in relaxed accuracy.
    pub strict_case: bool,
    pub qa_per_sample: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { strict_case: false, qa_per_sample: 3 }
    }
}

impl PipelineConfig {
    /// Reads and validates a TOML file; `None` yields the defaults. The
    /// `seed` flag, when given, wins over the file's seed.
    pub fn load(path: Option<&Path>, seed_flag: Option<u64>) -> Result<PipelineConfig, CliError> {
        let mut cfg = match path {
            None => PipelineConfig::default(),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
            }
        };
        if let Some(seed) = seed_flag {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.table_gen.validate().map_err(validation)?;
        self.ocr_noise.validate().map_err(validation)?;
        check_rate(self.objectives.rate)?;
        if self.objectives.max_ocr == 0 {
            return Err(CliError::Validation("objectives.max_ocr must be positive".into()));
        }
        let m = &self.model;
        if m.steps == 0 {
            return Err(CliError::Validation("model.steps must be positive".into()));
        }
        if !m.lr.is_finite() || m.lr <= 0.0 {
            return Err(CliError::Validation(format!("model.lr {} must be positive", m.lr)));
        }
        if !(0.0..1.0).contains(&m.momentum) {
            return Err(CliError::Validation(format!("model.momentum {} outside [0, 1)", m.momentum)));
        }
        if !(0.0..=1.0).contains(&m.final_lr_fraction) {
            return Err(CliError::Validation(format!(
                "model.final_lr_fraction {} outside [0, 1]",
                m.final_lr_fraction
            )));
        }
        if m.n_train == 0 || m.n_heldout == 0 {
            return Err(CliError::Validation("model.n_train and model.n_heldout must be positive".into()));
        }
        if self.eval.qa_per_sample == 0 {
            return Err(CliError::Validation("eval.qa_per_sample must be positive".into()));
        }
        Ok(())
    }
}

/// Mask rates live in (0, 1]; mirrors the objective module's rule so bad
/// flags fail before any file is touched.
pub fn check_rate(rate: f64) -> Result<(), CliError> {
    if !rate.is_finite() || rate <= 0.0 || rate > 1.0 {
        return Err(CliError::Validation(format!("mask rate {rate} outside (0, 1]")));
    }
    Ok(())
}
