//! Global average pooling per part, concatenated in slot order, with
//! zero filling for missing parts.

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{PartImage, PartOrder};
use super::evaluate::Accuracy;
use super::linear::{argmax, cross_entropy, Linear, LinearGrad};
use super::model::TrainConfig;
use crate::error::{FveError, Result};

/// One image for the baseline: per slot, the mean raw local feature of the
/// part in that slot, or `None` if it is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct GapInput {
    pub slots: Vec<Option<Array1<f64>>>,
    pub label: usize,
}

impl GapInput {
    pub fn from_image(img: &PartImage, order: PartOrder) -> Self {
        let slots = img
            .slot_order(order)
            .into_iter()
            .map(|p| img.parts[p].as_ref().map(|cells| cells.mean_axis(Axis(0)).expect("parts have cells")))
            .collect();
        Self {
            slots,
            label: img.label,
        }
    }
}

pub fn prepare_gap(images: &[PartImage], order: PartOrder) -> Vec<GapInput> {
    images.iter().map(|img| GapInput::from_image(img, order)).collect()
}

/// Extractor applied to pooled parts, then a linear classifier over the
/// `slots × D` concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct GapModel {
    pub extractor: Linear,
    pub classifier: Linear,
    pub slots: usize,
}

impl GapModel {
    pub fn new(cfg: &TrainConfig, d_in: usize, slots: usize, num_classes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let extractor = Linear::random(d_in, cfg.feature_dim, 1.0, &mut rng);
        let classifier = Linear::zeros(slots * cfg.feature_dim, num_classes);
        Self {
            extractor,
            classifier,
            slots,
        }
    }

    /// Fixed-length vectors, one row per image. Missing slots are exactly zero.
    pub fn vectors(&self, inputs: &[GapInput]) -> Array2<f64> {
        let d = self.extractor.outputs();
        let mut out = Array2::<f64>::zeros((inputs.len(), self.slots * d));
        for (i, input) in inputs.iter().enumerate() {
            for (slot, pooled) in input.slots.iter().enumerate() {
                if let Some(m) = pooled {
                    out.slice_mut(s![i, slot * d..(slot + 1) * d])
                        .assign(&self.extractor.forward_one(m.view()));
                }
            }
        }
        out
    }

    pub fn step(&mut self, batch: &[GapInput], lr: f64) -> Result<(f64, f64)> {
        let x = self.vectors(batch);
        let labels: Vec<usize> = batch.iter().map(|b| b.label).collect();
        let logits = self.classifier.forward(x.view());
        let (loss, dlogits) = cross_entropy(logits.view(), &labels);
        if !loss.is_finite() {
            return Err(FveError::InvalidParameter("baseline loss is not finite".into()));
        }
        let mut g_cls = LinearGrad::zeros_like(&self.classifier);
        g_cls.accumulate(x.view(), dlogits.view());
        let dx = dlogits.dot(&self.classifier.weight.t());
        let d = self.extractor.outputs();
        let mut g_ext = LinearGrad::zeros_like(&self.extractor);
        for (i, input) in batch.iter().enumerate() {
            for (slot, pooled) in input.slots.iter().enumerate() {
                if let Some(m) = pooled {
                    let dz = dx.slice(s![i, slot * d..(slot + 1) * d]);
                    g_ext.accumulate(m.view().insert_axis(Axis(0)), dz.insert_axis(Axis(0)));
                }
            }
        }
        self.classifier.apply(&g_cls, lr);
        self.extractor.apply(&g_ext, lr);
        let correct = logits
            .rows()
            .into_iter()
            .zip(&labels)
            .filter(|(row, &y)| argmax(row.view()) == y)
            .count();
        Ok((loss, correct as f64 / batch.len() as f64))
    }

    pub fn predict(&self, inputs: &[GapInput]) -> Vec<usize> {
        let x = self.vectors(inputs);
        self.classifier.forward(x.view()).rows().into_iter().map(argmax).collect()
    }

    pub fn evaluate(&self, inputs: &[GapInput], num_classes: usize) -> Accuracy {
        let labels: Vec<usize> = inputs.iter().map(|i| i.label).collect();
        Accuracy::from_predictions(&self.predict(inputs), &labels, num_classes)
    }
}

/// Trains the baseline with the config's schedule; returns the model and
/// per-epoch mean losses.
pub fn train_gap(cfg: &TrainConfig, train: &[GapInput], num_classes: usize) -> Result<(GapModel, Vec<f64>)> {
    cfg.validate()?;
    let first = train
        .first()
        .ok_or_else(|| FveError::InvalidParameter("empty training set".into()))?;
    let d_in = first
        .slots
        .iter()
        .flatten()
        .next()
        .map(|m| m.len())
        .ok_or_else(|| FveError::InvalidParameter("image without visible parts".into()))?;
    let mut model = GapModel::new(cfg, d_in, first.slots.len(), num_classes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<GapInput> = chunk.iter().map(|&i| train[i].clone()).collect();
            total += model.step(&batch, lr)?.0;
            batches += 1;
        }
        losses.push(total / batches as f64);
    }
    Ok((model, losses))
}
