//! Synthetic feature sets.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::batch::FeatureBatch;
use crate::error::{FveError, Result};
use crate::train::SyntheticPartDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Difficulty {
    #[default]
    Simple,
    /// Doubles the noise standard deviation.
    Hard,
}

impl std::str::FromStr for Difficulty {
    type Err = FveError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Self::Simple),
            "hard" => Ok(Self::Hard),
            other => Err(FveError::InvalidParameter(format!("unknown difficulty {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircleConfig {
    pub num_components: usize,
    pub samples_per_class: usize,
    pub sigma: f64,
    pub difficulty: Difficulty,
    pub seed: u64,
}

impl Default for CircleConfig {
    fn default() -> Self {
        Self {
            num_components: 10,
            samples_per_class: 400,
            sigma: 0.1,
            difficulty: Difficulty::Simple,
            seed: 0,
        }
    }
}

impl CircleConfig {
    /// Class `k`'s center, at angle `2πk / num_components` on the unit circle.
    pub fn center(&self, k: usize) -> [f64; 2] {
        let angle = 2.0 * PI * k as f64 / self.num_components as f64;
        [angle.cos(), angle.sin()]
    }

    pub fn effective_sigma(&self) -> f64 {
        match self.difficulty {
            Difficulty::Simple => self.sigma,
            Difficulty::Hard => 2.0 * self.sigma,
        }
    }
}

/// A feature batch with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub batch: FeatureBatch,
    pub labels: Vec<usize>,
}

/// Isotropic Gaussian clusters centered on the unit circle, class-major.
/// All rows belong to group 0.
pub fn synth_circle(cfg: &CircleConfig) -> Result<LabeledBatch> {
    if cfg.num_components == 0 {
        return Err(FveError::InvalidParameter("num_components must be at least 1".into()));
    }
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(FveError::InvalidParameter(format!("sigma must be positive, got {}", cfg.sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sigma = cfg.effective_sigma();
    let n = cfg.num_components * cfg.samples_per_class;
    let mut data = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for k in 0..cfg.num_components {
        let c = cfg.center(k);
        for i in 0..cfg.samples_per_class {
            let row = k * cfg.samples_per_class + i;
            for (j, cj) in c.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                data[[row, j]] = cj + sigma * z;
            }
            labels.push(k);
        }
    }
    Ok(LabeledBatch {
        batch: FeatureBatch::new(data)?,
        labels,
    })
}

/// Per-image group assignment of a part dataset flattened to raw cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLabel {
    pub group: u64,
    pub label: usize,
    pub train: bool,
}

/// Flattens every visible part's cells into one batch: group = image index
/// (train images first), part id = canonical slot.
pub fn parts_to_batch(ds: &SyntheticPartDataset) -> Result<(FeatureBatch, Vec<GroupLabel>)> {
    let d = ds.config.d_in;
    let mut values = Vec::new();
    let mut groups = Vec::new();
    let mut part_ids = Vec::new();
    let mut labels = Vec::new();
    let splits = ds.train.iter().map(|img| (img, true)).chain(ds.test.iter().map(|img| (img, false)));
    for (g, (img, train)) in splits.enumerate() {
        for (slot, part) in img.parts.iter().enumerate() {
            if let Some(cells) = part {
                for row in cells.rows() {
                    values.extend(row.iter().copied());
                    groups.push(g as u64);
                    part_ids.push(slot as u32);
                }
            }
        }
        labels.push(GroupLabel {
            group: g as u64,
            label: img.label,
            train,
        });
    }
    let data = Array2::from_shape_vec((groups.len(), d), values).map_err(|e| FveError::InvalidParameter(e.to_string()))?;
    let batch = FeatureBatch::with_groups(data, groups)?.with_part_ids(part_ids)?;
    Ok((batch, labels))
}
