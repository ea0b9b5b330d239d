//! Paired training runs behind the order/visibility and joint-vs-conventional
//! comparisons.

use serde::{Deserialize, Serialize};

use super::baseline::{prepare_gap, train_gap};
use super::conventional::conventional_pipeline;
use super::dataset::{PartOrder, PartsConfig, SyntheticPartDataset};
use super::model::{prepare_images, StepMetrics, Trainer, TrainConfig, Visibility};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    FveOrdered,
    FveShuffled,
    FveVisibleOnly,
    GapOrdered,
    GapShuffled,
}

impl Arm {
    pub const ALL: [Arm; 5] = [
        Arm::FveOrdered,
        Arm::FveShuffled,
        Arm::FveVisibleOnly,
        Arm::GapOrdered,
        Arm::GapShuffled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Arm::FveOrdered => "fve-ordered",
            Arm::FveShuffled => "fve-shuffled",
            Arm::FveVisibleOnly => "fve-visible-only",
            Arm::GapOrdered => "gap-ordered",
            Arm::GapShuffled => "gap-shuffled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmOutcome {
    pub arm: Arm,
    pub seed: u64,
    pub test_accuracy: f64,
    pub epoch_losses: Vec<f64>,
}

/// Trains and evaluates one arm. `observer` sees every FVE training step.
pub fn run_arm<F: FnMut(&StepMetrics)>(
    ds: &SyntheticPartDataset,
    arm: Arm,
    cfg: &TrainConfig,
    observer: F,
) -> Result<ArmOutcome> {
    let (test_accuracy, epoch_losses) = match arm {
        Arm::FveOrdered | Arm::FveShuffled | Arm::FveVisibleOnly => {
            let (order, vis) = match arm {
                Arm::FveOrdered => (PartOrder::Ordered, Visibility::ZeroFilled),
                Arm::FveShuffled => (PartOrder::Shuffled, Visibility::ZeroFilled),
                _ => (PartOrder::Shuffled, Visibility::VisibleOnly),
            };
            let train = prepare_images(&ds.train, order, vis);
            let test = prepare_images(&ds.test, order, vis);
            let mut trainer = Trainer::new(cfg.clone(), &train, ds.num_classes)?;
            let losses = trainer.fit(&train, observer)?;
            (trainer.model.evaluate(&test, ds.num_classes)?.overall, losses)
        }
        Arm::GapOrdered | Arm::GapShuffled => {
            let order = if arm == Arm::GapOrdered { PartOrder::Ordered } else { PartOrder::Shuffled };
            let train = prepare_gap(&ds.train, order);
            let test = prepare_gap(&ds.test, order);
            let (model, losses) = train_gap(cfg, &train, ds.num_classes)?;
            (model.evaluate(&test, ds.num_classes).overall, losses)
        }
    };
    Ok(ArmOutcome {
        arm,
        seed: cfg.seed,
        test_accuracy,
        epoch_losses,
    })
}

/// Joint and conventional accuracy for one `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KOutcome {
    pub k: usize,
    pub seed: u64,
    pub joint_accuracy: f64,
    pub conventional_accuracy: f64,
}

pub fn run_k_pair(ds: &SyntheticPartDataset, k: usize, cfg: &TrainConfig) -> Result<KOutcome> {
    let cfg = TrainConfig { k, ..cfg.clone() };
    let train = prepare_images(&ds.train, PartOrder::Shuffled, Visibility::VisibleOnly);
    let test = prepare_images(&ds.test, PartOrder::Shuffled, Visibility::VisibleOnly);
    let mut trainer = Trainer::new(cfg.clone(), &train, ds.num_classes)?;
    trainer.fit(&train, |_| {})?;
    let joint_accuracy = trainer.model.evaluate(&test, ds.num_classes)?.overall;
    let conventional_accuracy = conventional_pipeline(&cfg, &train, &test, ds.num_classes, k)?.accuracy.overall;
    Ok(KOutcome {
        k,
        seed: cfg.seed,
        joint_accuracy,
        conventional_accuracy,
    })
}

/// Dataset and training seed derived from one experiment seed.
pub fn seeded(parts: &PartsConfig, train: &TrainConfig, seed: u64) -> (PartsConfig, TrainConfig) {
    (
        PartsConfig { seed, ..parts.clone() },
        TrainConfig {
            seed: seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1),
            ..train.clone()
        },
    )
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
