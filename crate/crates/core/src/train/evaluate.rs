use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::{argmax, cross_entropy, Linear, LinearGrad};
use super::model::TrainConfig;

/// Top-1 accuracy with a per-class breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub overall: f64,
    /// Accuracy within each true class; `NaN` for classes absent from the split.
    pub per_class: Vec<f64>,
    pub total: usize,
}

impl Accuracy {
    pub fn from_predictions(preds: &[usize], labels: &[usize], num_classes: usize) -> Self {
        let mut hit = vec![0usize; num_classes];
        let mut seen = vec![0usize; num_classes];
        for (&p, &y) in preds.iter().zip(labels) {
            seen[y] += 1;
            if p == y {
                hit[y] += 1;
            }
        }
        let correct: usize = hit.iter().sum();
        Self {
            overall: correct as f64 / labels.len().max(1) as f64,
            per_class: hit
                .iter()
                .zip(&seen)
                .map(|(&h, &s)| if s == 0 { f64::NAN } else { h as f64 / s as f64 })
                .collect(),
            total: labels.len(),
        }
    }
}

pub fn predict_linear(layer: &Linear, x: ArrayView2<'_, f64>) -> Vec<usize> {
    layer.forward(x).rows().into_iter().map(argmax).collect()
}

/// Softmax regression on fixed inputs with the config's batch size and
/// step-decay schedule. Returns the layer and per-epoch mean losses.
pub fn fit_linear(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> (Linear, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = Linear::random(x.ncols(), num_classes, 0.01, &mut rng);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb: Array2<f64> = x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let logits = layer.forward(xb.view());
            let (loss, dlogits) = cross_entropy(logits.view(), &yb);
            let mut g = LinearGrad::zeros_like(&layer);
            g.accumulate(xb.view(), dlogits.view());
            layer.apply(&g, lr);
            total += loss;
            batches += 1;
        }
        losses.push(total / batches as f64);
    }
    (layer, losses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_breakdown() {
        let acc = Accuracy::from_predictions(&[0, 1, 1, 2], &[0, 1, 2, 2], 4);
        assert_eq!(acc.overall, 0.75);
        assert_eq!(acc.per_class[..3], [1.0, 1.0, 0.5]);
        assert!(acc.per_class[3].is_nan());
    }
}
