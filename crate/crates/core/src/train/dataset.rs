//! Synthetic part-annotated images.
//!
//! Every class `c` has a direction `u_c`; every part slot `p` has an offset
//! `b_p` and a sign `s_p = ±1` (alternating). A visible part contributes
//! `cells` local features `b_p + s_p·u_c + noise`. With all parts visible the
//! signed class terms cancel in any slot-agnostic sum, so a classifier that
//! ignores which slot a feature came from has to rely on higher-order set
//! statistics, while a slot-ordered concatenation sees `s_p·u_c` directly.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FveError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartsConfig {
    pub num_classes: usize,
    pub images_per_class: usize,
    pub parts_max: usize,
    pub cells_per_part: usize,
    pub d_in: usize,
    pub visibility_rate: f64,
    pub noise: f64,
    /// Length of each class direction `u_c`.
    pub signal: f64,
    /// Scale of the per-slot offsets `b_p`.
    pub offset: f64,
    pub seed: u64,
}

impl Default for PartsConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            images_per_class: 200,
            parts_max: 4,
            cells_per_part: 16,
            d_in: 8,
            visibility_rate: 0.6,
            noise: 0.3,
            signal: 1.5,
            offset: 2.0,
            seed: 0,
        }
    }
}

/// One image: `parts_max` slots in canonical order, `None` where the part is
/// not visible. Each visible part holds `cells × d_in` local features.
#[derive(Debug, Clone, PartialEq)]
pub struct PartImage {
    pub parts: Vec<Option<Array2<f64>>>,
    pub label: usize,
    /// A fixed random slot order, used by the shuffled arms.
    pub shuffle: Vec<usize>,
}

impl PartImage {
    pub fn visibility(&self) -> Vec<bool> {
        self.parts.iter().map(Option::is_some).collect()
    }

    pub fn visible_count(&self) -> usize {
        self.parts.iter().filter(|p| p.is_some()).count()
    }

    /// Slot order for the requested arm.
    pub fn slot_order(&self, order: PartOrder) -> Vec<usize> {
        match order {
            PartOrder::Ordered => (0..self.parts.len()).collect(),
            PartOrder::Shuffled => self.shuffle.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartOrder {
    Ordered,
    Shuffled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPartDataset {
    pub config: PartsConfig,
    pub train: Vec<PartImage>,
    pub test: Vec<PartImage>,
    pub num_classes: usize,
}

impl SyntheticPartDataset {
    pub fn all(&self) -> impl Iterator<Item = &PartImage> {
        self.train.iter().chain(self.test.iter())
    }
}

fn validate(cfg: &PartsConfig) -> Result<()> {
    if cfg.num_classes == 0 || cfg.images_per_class == 0 || cfg.parts_max == 0 || cfg.cells_per_part == 0 || cfg.d_in == 0 {
        return Err(FveError::InvalidParameter("synth_parts sizes must be positive".into()));
    }
    if !(cfg.visibility_rate > 0.0 && cfg.visibility_rate <= 1.0) {
        return Err(FveError::InvalidParameter("visibility_rate must lie in (0, 1]".into()));
    }
    if !(cfg.noise >= 0.0) {
        return Err(FveError::InvalidParameter("noise must be nonnegative".into()));
    }
    Ok(())
}

/// Generates the dataset and its seeded 80/20 train/test split.
pub fn synth_parts(cfg: &PartsConfig) -> Result<SyntheticPartDataset> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let directions: Vec<Array1<f64>> = (0..cfg.num_classes)
        .map(|_| {
            let v = Array1::from_shape_fn(cfg.d_in, |_| normal(&mut rng));
            let len = v.dot(&v).sqrt().max(1e-12);
            v * (cfg.signal / len)
        })
        .collect();
    let offsets: Vec<Array1<f64>> = (0..cfg.parts_max)
        .map(|_| Array1::from_shape_fn(cfg.d_in, |_| normal(&mut rng)) * cfg.offset)
        .collect();

    let mut images = Vec::with_capacity(cfg.num_classes * cfg.images_per_class);
    for class in 0..cfg.num_classes {
        for _ in 0..cfg.images_per_class {
            let mask = loop {
                let m: Vec<bool> = (0..cfg.parts_max).map(|_| rng.random::<f64>() < cfg.visibility_rate).collect();
                if m.iter().any(|&v| v) {
                    break m;
                }
            };
            let parts = mask
                .iter()
                .enumerate()
                .map(|(p, &visible)| {
                    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                    let cells = Array2::from_shape_fn((cfg.cells_per_part, cfg.d_in), |(_, j)| {
                        offsets[p][j] + sign * directions[class][j] + cfg.noise * normal(&mut rng)
                    });
                    visible.then_some(cells)
                })
                .collect();
            let mut shuffle: Vec<usize> = (0..cfg.parts_max).collect();
            shuffle.shuffle(&mut rng);
            images.push(PartImage {
                parts,
                label: class,
                shuffle,
            });
        }
    }

    images.shuffle(&mut rng);
    let n_train = (images.len() * 4).div_ceil(5);
    let test = images.split_off(n_train);
    Ok(SyntheticPartDataset {
        config: cfg.clone(),
        train: images,
        test,
        num_classes: cfg.num_classes,
    })
}
