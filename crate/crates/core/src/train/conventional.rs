//! Two-stage comparison arm: features from a frozen extractor, a mixture fit
//! by full-batch EM on all training features, normalized Fisher vectors, and
//! a separately trained linear classifier.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::evaluate::{fit_linear, predict_linear, Accuracy};
use super::linear::Linear;
use super::model::{ImageInput, ToyModel, TrainConfig};
use crate::error::Result;
use crate::fve::{encode, normalize_fv};
use crate::gmm::{em_full, DiagGmm, EmTrace};
use crate::init::{InitSpec, InitStrategy};

const EM_MAX_ITERS: usize = 200;
const EM_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ConventionalResult {
    pub k: usize,
    pub gmm: DiagGmm,
    pub em_trace: EmTrace,
    pub classifier: Linear,
    pub accuracy: Accuracy,
    /// Length of each normalized encoding (`2·K·D`).
    pub encoding_len: usize,
}

/// The frozen extractor is the seeded initial extractor of the joint model
/// built from the same `cfg`, so both arms start from identical features.
pub fn frozen_extractor(cfg: &TrainConfig, d_in: usize) -> Linear {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Linear::random(d_in, cfg.feature_dim, 1.0, &mut rng)
}

fn encodings(model: &ToyModel, gmm: &DiagGmm, images: &[ImageInput]) -> Result<Array2<f64>> {
    let width = 2 * gmm.k() * gmm.dim();
    let mut out = Array2::<f64>::zeros((images.len(), width));
    let (_, prepared) = model.filtered_features(images)?;
    for (i, (_, features)) in prepared.iter().enumerate() {
        let fv = normalize_fv(&encode(gmm, features.view())?, true, true);
        out.row_mut(i).assign(&ndarray::ArrayView1::from(fv.values()));
    }
    Ok(out)
}

pub fn conventional_pipeline(
    cfg: &TrainConfig,
    train: &[ImageInput],
    test: &[ImageInput],
    num_classes: usize,
    k: usize,
) -> Result<ConventionalResult> {
    let d_in = train[0].raw.ncols();
    let cfg_k = TrainConfig { k, ..cfg.clone() };
    // The model here only carries the frozen extractor and the filter.
    let mut shell = ToyModel::new(&cfg_k, d_in, num_classes, &train[..train.len().min(cfg.batch_size)])?;
    shell.extractor = frozen_extractor(cfg, d_in);

    let (all, _) = shell.filtered_features(train)?;
    let fit = em_full(&all, k, &InitSpec::new(InitStrategy::KMeans, cfg.seed), EM_MAX_ITERS, EM_TOL)?;

    let x_train = encodings(&shell, &fit.gmm, train)?;
    let y_train: Vec<usize> = train.iter().map(|i| i.label).collect();
    let (classifier, _) = fit_linear(x_train.view(), &y_train, num_classes, cfg, cfg.seed ^ 0xc1a5);

    let x_test = encodings(&shell, &fit.gmm, test)?;
    let y_test: Vec<usize> = test.iter().map(|i| i.label).collect();
    let accuracy = Accuracy::from_predictions(&predict_linear(&classifier, x_test.view()), &y_test, num_classes);
    Ok(ConventionalResult {
        k,
        encoding_len: x_train.ncols(),
        gmm: fit.gmm,
        em_trace: fit.trace,
        classifier,
        accuracy,
    })
}
