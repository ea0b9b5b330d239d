//! Run configuration for the joint-training demo: a flat TOML table with
//! kebab-case keys matching the `demo-joint` long flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FveError, Result};
use crate::train::{Arm, PartsConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DemoConfig {
    pub num_classes: usize,
    pub images_per_class: usize,
    pub parts_max: usize,
    pub cells_per_part: usize,
    pub d_in: usize,
    pub visibility_rate: f64,
    pub noise: f64,
    pub signal: f64,
    pub offset: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_decay: f64,
    pub decay_epochs: Vec<usize>,
    pub lambda: f64,
    pub k: usize,
    pub feature_dim: usize,
    pub filter_norm: bool,
    pub fusion: bool,
    pub seed: u64,
    pub arms: Vec<Arm>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self::from_parts(&PartsConfig::default(), &TrainConfig::default())
    }
}

impl DemoConfig {
    pub fn from_parts(p: &PartsConfig, t: &TrainConfig) -> Self {
        Self {
            num_classes: p.num_classes,
            images_per_class: p.images_per_class,
            parts_max: p.parts_max,
            cells_per_part: p.cells_per_part,
            d_in: p.d_in,
            visibility_rate: p.visibility_rate,
            noise: p.noise,
            signal: p.signal,
            offset: p.offset,
            epochs: t.epochs,
            batch_size: t.batch_size,
            base_lr: t.base_lr,
            lr_decay: t.lr_decay,
            decay_epochs: t.decay_epochs.clone(),
            lambda: t.lambda,
            k: t.k,
            feature_dim: t.feature_dim,
            filter_norm: t.filter_norm,
            fusion: t.fusion,
            seed: p.seed,
            arms: Arm::ALL.to_vec(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| FveError::Config(e.message().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parts(&self) -> PartsConfig {
        PartsConfig {
            num_classes: self.num_classes,
            images_per_class: self.images_per_class,
            parts_max: self.parts_max,
            cells_per_part: self.cells_per_part,
            d_in: self.d_in,
            visibility_rate: self.visibility_rate,
            noise: self.noise,
            signal: self.signal,
            offset: self.offset,
            seed: self.seed,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            base_lr: self.base_lr,
            lr_decay: self.lr_decay,
            decay_epochs: self.decay_epochs.clone(),
            lambda: self.lambda,
            k: self.k,
            feature_dim: self.feature_dim,
            filter_norm: self.filter_norm,
            fusion: self.fusion,
            seed: self.seed,
        }
    }
}
