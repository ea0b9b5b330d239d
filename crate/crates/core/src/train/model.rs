//! Linear extractor → norm filter → FVE layer → linear classifier.
//!
//! The extractor and classifier learn by gradient descent. The mixture inside
//! the FVE layer only ever changes through [`EmaState::step`], once per
//! training batch, on the filtered features of that batch; the loss gradient
//! passes through the layer to the features but never reaches the mixture.

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{PartImage, PartOrder};
use super::evaluate::Accuracy;
use super::linear::{argmax, cross_entropy, Linear, LinearGrad};
use crate::batch::FeatureBatch;
use crate::error::{check_dim, FveError, Result};
use crate::fve::{encode, encode_vjp, FisherVector};
use crate::gmm::{mean_log_likelihood, DiagGmm};
use crate::init::{InitSpec, InitStrategy};
use crate::parts::norm_filter_indices;
use crate::streaming::{init_streaming, EmaState};

/// How missing parts appear in an image's feature set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Visibility {
    /// Missing slots contribute all-zero feature rows.
    ZeroFilled,
    /// Missing slots contribute nothing.
    VisibleOnly,
}

/// One image prepared for the FVE pipeline: raw local features stacked in
/// slot order, with `fill[n]` marking zero-filled placeholder rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageInput {
    pub raw: Array2<f64>,
    pub fill: Vec<bool>,
    pub label: usize,
}

impl ImageInput {
    pub fn new(raw: Array2<f64>, label: usize) -> Self {
        let n = raw.nrows();
        Self {
            raw,
            fill: vec![false; n],
            label,
        }
    }

    pub fn from_image(img: &PartImage, order: PartOrder, vis: Visibility) -> Self {
        let (cells, d_in) = img
            .parts
            .iter()
            .flatten()
            .next()
            .map(|p| p.dim())
            .expect("every image has a visible part");
        let mut rows = Vec::new();
        let mut fill = Vec::new();
        for slot in img.slot_order(order) {
            match &img.parts[slot] {
                Some(part) => {
                    rows.extend(part.iter().cloned());
                    fill.extend(std::iter::repeat_n(false, cells));
                }
                None if vis == Visibility::ZeroFilled => {
                    rows.extend(std::iter::repeat_n(0.0, cells * d_in));
                    fill.extend(std::iter::repeat_n(true, cells));
                }
                None => {}
            }
        }
        let n = fill.len();
        Self {
            raw: Array2::from_shape_vec((n, d_in), rows).expect("rows match cell layout"),
            fill,
            label: img.label,
        }
    }

    /// Mean of the raw non-placeholder rows.
    pub fn mean_raw(&self) -> Array1<f64> {
        let mut sum = Array1::<f64>::zeros(self.raw.ncols());
        let mut count = 0.0f64;
        for (row, &f) in self.raw.rows().into_iter().zip(&self.fill) {
            if !f {
                sum += &row;
                count += 1.0;
            }
        }
        sum / count.max(1.0)
    }
}

pub fn prepare_images(images: &[PartImage], order: PartOrder, vis: Visibility) -> Vec<ImageInput> {
    images.iter().map(|img| ImageInput::from_image(img, order, vis)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    /// Multiplier applied at each epoch listed in `decay_epochs`.
    pub lr_decay: f64,
    pub decay_epochs: Vec<usize>,
    pub lambda: f64,
    pub k: usize,
    /// Extractor output dimension `D`.
    pub feature_dim: usize,
    pub filter_norm: bool,
    /// Adds a second head on the mean raw input and sums both heads' logits.
    pub fusion: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            base_lr: 0.01,
            lr_decay: 0.1,
            decay_epochs: vec![20, 40],
            lambda: 0.9,
            k: 5,
            feature_dim: 4,
            filter_norm: true,
            fusion: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.k == 0 || self.feature_dim == 0 {
            return Err(FveError::InvalidParameter("epochs, batch_size, k, feature_dim must be positive".into()));
        }
        if !(self.base_lr >= 0.0) || !(self.lr_decay > 0.0) {
            return Err(FveError::InvalidParameter("learning rate and decay must be positive".into()));
        }
        if self.decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FveError::InvalidParameter("decay_epochs must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Step-decay learning rate for a zero-based epoch.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = self.decay_epochs.iter().filter(|&&e| epoch >= e).count();
        self.base_lr * self.lr_decay.powi(drops as i32)
    }
}

/// Per-step training record, emitted as one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub gmm_log_likelihood: f64,
    pub lr: f64,
}

/// State captured when training hits a non-finite loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainDiagnostic {
    pub step: u64,
    pub loss: f64,
    pub gmm: Option<DiagGmm>,
    pub extractor_norm: f64,
    pub classifier_norm: f64,
}

/// Kept row indices and their extracted features, for one image.
type Prepared = (Vec<usize>, Array2<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub extractor: Linear,
    pub gmm_state: EmaState,
    pub classifier: Linear,
    pub global_head: Option<Linear>,
    pub filter_norm: bool,
}

/// Forward intermediates of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageForward {
    /// Indices of the rows that survived filtering.
    pub kept: Vec<usize>,
    /// Extracted features of the kept rows.
    pub features: Array2<f64>,
    pub fv: FisherVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub images: Vec<ImageForward>,
    pub logits: Array2<f64>,
    pub loss: f64,
    /// `∂loss/∂logits`.
    pub dlogits: Array2<f64>,
}

impl ForwardPass {
    pub fn predictions(&self) -> Vec<usize> {
        self.logits.rows().into_iter().map(argmax).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub extractor: LinearGrad,
    pub classifier: LinearGrad,
    pub global_head: Option<LinearGrad>,
}

/// One training step's outcome, including the features the mixture saw.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub loss: f64,
    pub accuracy: f64,
    pub gmm_log_likelihood: f64,
    pub filtered: FeatureBatch,
}

impl ToyModel {
    /// Seeded extractor and classifier; the mixture is initialized by
    /// k-means on `first_batch`'s filtered features.
    pub fn new(cfg: &TrainConfig, d_in: usize, num_classes: usize, first_batch: &[ImageInput]) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let extractor = Linear::random(d_in, cfg.feature_dim, 1.0, &mut rng);
        let classifier = Linear::zeros(2 * cfg.k * cfg.feature_dim, num_classes);
        let global_head = cfg.fusion.then(|| Linear::zeros(d_in, num_classes));
        Self::assemble(extractor, classifier, global_head, cfg, first_batch)
    }

    /// Builds a model around given layers.
    pub fn assemble(
        extractor: Linear,
        classifier: Linear,
        global_head: Option<Linear>,
        cfg: &TrainConfig,
        first_batch: &[ImageInput],
    ) -> Result<Self> {
        check_dim("classifier inputs", 2 * cfg.k * extractor.outputs(), classifier.inputs())?;
        let mut model = Self {
            extractor,
            gmm_state: EmaState::new(DiagGmm::single(&vec![0.0; cfg.feature_dim], &vec![1.0; cfg.feature_dim])?, cfg.lambda)?,
            classifier,
            global_head,
            filter_norm: cfg.filter_norm,
        };
        let (filtered, _) = model.filtered_features(first_batch)?;
        let init = InitSpec::new(InitStrategy::KMeans, cfg.seed);
        model.gmm_state = init_streaming(&filtered, cfg.k, cfg.lambda, &init)?;
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.gmm_state.k()
    }

    /// Mixture used for encoding: debiased snapshot, or the starting model
    /// before any update.
    pub fn gmm(&self) -> Result<DiagGmm> {
        self.gmm_state.current()
    }

    /// Extracted features of every row; placeholder rows stay exactly zero.
    pub fn extract(&self, img: &ImageInput) -> Array2<f64> {
        let mut z = self.extractor.forward(img.raw.view());
        for (mut row, &f) in z.rows_mut().into_iter().zip(&img.fill) {
            if f {
                row.fill(0.0);
            }
        }
        z
    }

    fn kept_rows(&self, z: &Array2<f64>) -> Vec<usize> {
        if self.filter_norm {
            let b = FeatureBatch::new(z.clone()).expect("extracted features are finite");
            norm_filter_indices(&b).0
        } else {
            (0..z.nrows()).collect()
        }
    }

    fn prepare(&self, img: &ImageInput) -> (Vec<usize>, Array2<f64>) {
        let z = self.extract(img);
        let kept = self.kept_rows(&z);
        let features = z.select(Axis(0), &kept);
        (kept, features)
    }

    /// The filtered features of a batch, one group per image.
    pub fn filtered_features(&self, images: &[ImageInput]) -> Result<(FeatureBatch, Vec<Prepared>)> {
        let prepared: Vec<_> = images.iter().map(|img| self.prepare(img)).collect();
        let total: usize = prepared.iter().map(|(k, _)| k.len()).sum();
        let d = self.extractor.outputs();
        let mut data = Array2::<f64>::zeros((total, d));
        let mut groups = Vec::with_capacity(total);
        let mut r = 0;
        for (i, (_, f)) in prepared.iter().enumerate() {
            data.slice_mut(s![r..r + f.nrows(), ..]).assign(f);
            groups.extend(std::iter::repeat_n(i as u64, f.nrows()));
            r += f.nrows();
        }
        Ok((FeatureBatch::with_groups(data, groups)?, prepared))
    }

    fn head_logits(&self, fvs: &[FisherVector], images: &[ImageInput]) -> Array2<f64> {
        let width = self.classifier.inputs();
        let mut x = Array2::<f64>::zeros((fvs.len(), width));
        for (i, fv) in fvs.iter().enumerate() {
            x.row_mut(i).assign(&ndarray::ArrayView1::from(fv.values()));
        }
        let mut logits = self.classifier.forward(x.view());
        if let Some(head) = &self.global_head {
            let g = global_inputs(images);
            logits += &head.forward(g.view());
        }
        logits
    }

    fn forward_prepared(
        &self,
        gmm: &DiagGmm,
        images: &[ImageInput],
        prepared: Vec<Prepared>,
    ) -> Result<ForwardPass> {
        let mut out = Vec::with_capacity(images.len());
        for (kept, features) in prepared {
            let fv = encode(gmm, features.view())?;
            out.push(ImageForward { kept, features, fv });
        }
        let fvs: Vec<FisherVector> = out.iter().map(|f| f.fv.clone()).collect();
        let logits = self.head_logits(&fvs, images);
        let labels: Vec<usize> = images.iter().map(|i| i.label).collect();
        let (loss, dlogits) = cross_entropy(logits.view(), &labels);
        Ok(ForwardPass {
            images: out,
            logits,
            loss,
            dlogits,
        })
    }

    /// Forward pass against an explicit mixture.
    pub fn forward_with(&self, gmm: &DiagGmm, images: &[ImageInput]) -> Result<ForwardPass> {
        let prepared = images.iter().map(|img| self.prepare(img)).collect();
        self.forward_prepared(gmm, images, prepared)
    }

    /// Forward pass against the model's current mixture.
    pub fn forward(&self, images: &[ImageInput]) -> Result<ForwardPass> {
        self.forward_with(&self.gmm()?, images)
    }

    /// Gradients of the pass's mean loss; the mixture is a constant.
    pub fn backward(&self, gmm: &DiagGmm, images: &[ImageInput], pass: &ForwardPass) -> Result<ModelGrads> {
        let mut g_cls = LinearGrad::zeros_like(&self.classifier);
        let mut g_ext = LinearGrad::zeros_like(&self.extractor);
        let width = self.classifier.inputs();
        let mut fv_mat = Array2::<f64>::zeros((images.len(), width));
        for (i, f) in pass.images.iter().enumerate() {
            fv_mat.row_mut(i).assign(&ndarray::ArrayView1::from(f.fv.values()));
        }
        g_cls.accumulate(fv_mat.view(), pass.dlogits.view());
        let dfv = pass.dlogits.dot(&self.classifier.weight.t());

        for (i, (img, f)) in images.iter().zip(&pass.images).enumerate() {
            let upstream = dfv.row(i).to_vec();
            let grad = encode_vjp(gmm, f.features.view(), &upstream)?;
            // Placeholder rows are constants; filtered-out rows never entered the encoding.
            let mut rows = Vec::with_capacity(f.kept.len());
            let mut sel = Vec::with_capacity(f.kept.len());
            for (j, &n) in f.kept.iter().enumerate() {
                if !img.fill[n] {
                    rows.push(n);
                    sel.push(j);
                }
            }
            if rows.is_empty() {
                continue;
            }
            let x = img.raw.select(Axis(0), &rows);
            let dz = grad.grad.select(Axis(0), &sel);
            g_ext.accumulate(x.view(), dz.view());
        }

        let global_head = self.global_head.as_ref().map(|head| {
            let mut g = LinearGrad::zeros_like(head);
            g.accumulate(global_inputs(images).view(), pass.dlogits.view());
            g
        });
        Ok(ModelGrads {
            extractor: g_ext,
            classifier: g_cls,
            global_head,
        })
    }

    pub fn apply(&mut self, grads: &ModelGrads, lr: f64) {
        self.extractor.apply(&grads.extractor, lr);
        self.classifier.apply(&grads.classifier, lr);
        if let (Some(head), Some(g)) = (self.global_head.as_mut(), grads.global_head.as_ref()) {
            head.apply(g, lr);
        }
    }

    /// Filter, one streaming EM step on the filtered features, encode with
    /// the updated mixture, classify, backpropagate, and take a gradient step
    /// on the extractor and classifier.
    pub fn train_step(&mut self, images: &[ImageInput], lr: f64) -> Result<StepReport> {
        if images.is_empty() {
            return Err(FveError::InvalidParameter("empty training batch".into()));
        }
        let (filtered, prepared) = self.filtered_features(images)?;
        self.gmm_state.step(&filtered)?;
        let gmm = self.gmm_state.bias_corrected()?;
        let pass = self.forward_prepared(&gmm, images, prepared)?;
        if !pass.loss.is_finite() {
            return Err(FveError::NonFiniteLoss(Box::new(TrainDiagnostic {
                step: self.gmm_state.t(),
                loss: pass.loss,
                gmm: Some(gmm),
                extractor_norm: frobenius(&self.extractor.weight),
                classifier_norm: frobenius(&self.classifier.weight),
            })));
        }
        let grads = self.backward(&gmm, images, &pass)?;
        self.apply(&grads, lr);
        let correct = pass
            .predictions()
            .iter()
            .zip(images)
            .filter(|(p, img)| **p == img.label)
            .count();
        Ok(StepReport {
            loss: pass.loss,
            accuracy: correct as f64 / images.len() as f64,
            gmm_log_likelihood: mean_log_likelihood(&gmm, &filtered)?,
            filtered,
        })
    }

    pub fn predict(&self, images: &[ImageInput]) -> Result<Vec<usize>> {
        Ok(self.forward(images)?.predictions())
    }

    pub fn evaluate(&self, images: &[ImageInput], num_classes: usize) -> Result<Accuracy> {
        let preds = self.predict(images)?;
        let labels: Vec<usize> = images.iter().map(|i| i.label).collect();
        Ok(Accuracy::from_predictions(&preds, &labels, num_classes))
    }
}

fn global_inputs(images: &[ImageInput]) -> Array2<f64> {
    let d = images.first().map(|i| i.raw.ncols()).unwrap_or(0);
    let mut g = Array2::<f64>::zeros((images.len(), d));
    for (i, img) in images.iter().enumerate() {
        g.row_mut(i).assign(&img.mean_raw());
    }
    g
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Drives epochs of [`ToyModel::train_step`] over a training set.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: ToyModel,
    pub config: TrainConfig,
    step: u64,
    shuffle_rng: ChaCha8Rng,
    recorded: Option<Vec<FeatureBatch>>,
}

impl Trainer {
    pub fn new(config: TrainConfig, train: &[ImageInput], num_classes: usize) -> Result<Self> {
        config.validate()?;
        let d_in = train
            .first()
            .map(|img| img.raw.ncols())
            .ok_or_else(|| FveError::InvalidParameter("empty training set".into()))?;
        let shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed);
        // A clone, so epoch 0 draws the same permutation `first` came from.
        let first = first_batch(train, config.batch_size, &mut shuffle_rng.clone());
        let model = ToyModel::new(&config, d_in, num_classes, &first)?;
        Ok(Self {
            model,
            config,
            step: 0,
            shuffle_rng,
            recorded: None,
        })
    }

    /// Keeps every batch's filtered features for later replay.
    pub fn record_features(mut self) -> Self {
        self.recorded = Some(Vec::new());
        self
    }

    pub fn recorded(&self) -> Option<&[FeatureBatch]> {
        self.recorded.as_deref()
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One pass over `train` in a fresh seeded order; returns the mean
    /// batch loss.
    pub fn run_epoch<F: FnMut(&StepMetrics)>(&mut self, train: &[ImageInput], epoch: usize, observer: &mut F) -> Result<f64> {
        let lr = self.config.lr_at(epoch);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.shuffle_rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<ImageInput> = chunk.iter().map(|&i| train[i].clone()).collect();
            let report = self.model.train_step(&batch, lr)?;
            self.step += 1;
            total += report.loss;
            batches += 1;
            observer(&StepMetrics {
                step: self.step,
                epoch,
                loss: report.loss,
                accuracy: report.accuracy,
                gmm_log_likelihood: report.gmm_log_likelihood,
                lr,
            });
            if let Some(rec) = self.recorded.as_mut() {
                rec.push(report.filtered);
            }
        }
        Ok(total / batches as f64)
    }

    /// All configured epochs; returns the per-epoch mean loss.
    pub fn fit<F: FnMut(&StepMetrics)>(&mut self, train: &[ImageInput], mut observer: F) -> Result<Vec<f64>> {
        (0..self.config.epochs)
            .map(|epoch| self.run_epoch(train, epoch, &mut observer))
            .collect()
    }
}

/// The first batch epoch 0 will see under the trainer's shuffle stream.
fn first_batch(train: &[ImageInput], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<ImageInput> {
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(rng);
    order.iter().take(batch_size).map(|&i| train[i].clone()).collect()
}
