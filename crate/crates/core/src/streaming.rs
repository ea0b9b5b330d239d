//! Mini-batch EM with exponential-moving-average parameter tracking.
//!
//! Each mini-batch gets exactly one E-step and one M-step. The M-step output
//! is folded into zero-initialized accumulators
//!
//! ```text
//! a[t] = λ·a[t-1] + (1-λ)·a_new
//! ```
//!
//! and the usable model is the debiased snapshot `a[t] / (1 - λ^t)`. Because
//! the accumulators start at zero, the weight accumulators always sum to
//! `1 - λ^t`, so the debiased weights sum to one.

use ndarray::{Array1, Array2};

use crate::batch::FeatureBatch;
use crate::error::{check_dim, FveError, Result};
use crate::gmm::{assign_rows, m_step, DiagGmm, VAR_FLOOR};
use crate::init::{initialize, InitSpec};

pub const DEFAULT_LAMBDA: f64 = 0.9;

/// One mini-batch's M-step output (`α_new`, `μ_new`, `σ²_new`).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEstimates {
    pub weights: Array1<f64>,
    pub means: Array2<f64>,
    pub variances: Array2<f64>,
    /// Effective counts `N_k` within the batch.
    pub counts: Array1<f64>,
    /// Mean log-likelihood of the batch under the model used for the E-step.
    pub log_likelihood: f64,
}

/// Streaming estimator state.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    lambda: f64,
    t: u64,
    acc_weights: Array1<f64>,
    acc_means: Array2<f64>,
    acc_variances: Array2<f64>,
    /// Model used for responsibilities before the first update.
    init_gmm: DiagGmm,
}

/// Raw accumulator contents, for persistence.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulators {
    pub weights: Array1<f64>,
    pub means: Array2<f64>,
    pub variances: Array2<f64>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(FveError::InvalidParameter(format!("lambda must lie in (0, 1), got {lambda}")))
    }
}

impl EmaState {
    /// Fresh state around a starting model.
    pub fn new(init_gmm: DiagGmm, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let (k, d) = (init_gmm.k(), init_gmm.dim());
        Ok(Self {
            lambda,
            t: 0,
            acc_weights: Array1::zeros(k),
            acc_means: Array2::zeros((k, d)),
            acc_variances: Array2::zeros((k, d)),
            init_gmm,
        })
    }

    /// Restores a state from persisted accumulators.
    pub fn from_accumulators(init_gmm: DiagGmm, lambda: f64, t: u64, acc: Accumulators) -> Result<Self> {
        let mut state = Self::new(init_gmm, lambda)?;
        check_dim("accumulator weights", state.k(), acc.weights.len())?;
        check_dim("accumulator means", state.k() * state.dim(), acc.means.len())?;
        check_dim("accumulator variances", state.k() * state.dim(), acc.variances.len())?;
        state.t = t;
        state.acc_weights = acc.weights;
        state.acc_means = acc.means;
        state.acc_variances = acc.variances;
        Ok(state)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn k(&self) -> usize {
        self.init_gmm.k()
    }

    pub fn dim(&self) -> usize {
        self.init_gmm.dim()
    }

    pub fn init_gmm(&self) -> &DiagGmm {
        &self.init_gmm
    }

    pub fn accumulators(&self) -> Accumulators {
        Accumulators {
            weights: self.acc_weights.clone(),
            means: self.acc_means.clone(),
            variances: self.acc_variances.clone(),
        }
    }

    /// `1 - λ^t`.
    pub fn correction(&self) -> f64 {
        1.0 - self.lambda.powf(self.t as f64)
    }

    /// Folds one batch's estimates into the accumulators and advances `t`.
    pub fn update(&mut self, est: &BatchEstimates) -> Result<()> {
        check_dim("estimate weights", self.k(), est.weights.len())?;
        check_dim("estimate means", self.k() * self.dim(), est.means.len())?;
        check_dim("estimate variances", self.k() * self.dim(), est.variances.len())?;
        let lam = self.lambda;
        let fresh = 1.0 - lam;
        self.acc_weights.zip_mut_with(&est.weights, |a, &n| *a = lam * *a + fresh * n);
        self.acc_means.zip_mut_with(&est.means, |a, &n| *a = lam * *a + fresh * n);
        self.acc_variances.zip_mut_with(&est.variances, |a, &n| *a = lam * *a + fresh * n);
        self.t += 1;
        Ok(())
    }

    /// The debiased snapshot `accumulators / (1 - λ^t)`.
    pub fn bias_corrected(&self) -> Result<DiagGmm> {
        if self.t == 0 {
            return Err(FveError::Uninitialized);
        }
        let c = self.correction();
        let mut weights = self.acc_weights.mapv(|a| a / c);
        let total = weights.sum();
        if (total - 1.0).abs() > 1e-9 {
            weights /= total;
        }
        let means = self.acc_means.mapv(|a| a / c);
        let variances = self.acc_variances.mapv(|a| (a / c).max(VAR_FLOOR));
        Ok(DiagGmm::from_parts(weights, means, variances))
    }

    /// The model responsibilities are computed against: `init_gmm` before
    /// the first update, the debiased snapshot afterwards.
    pub fn current(&self) -> Result<DiagGmm> {
        if self.t == 0 {
            Ok(self.init_gmm.clone())
        } else {
            self.bias_corrected()
        }
    }

    /// One E-step and one M-step on `batch`, then the EMA update.
    pub fn step(&mut self, batch: &FeatureBatch) -> Result<BatchEstimates> {
        let current = self.current()?;
        let est = batch_estimates(&current, batch)?;
        self.update(&est)?;
        Ok(est)
    }
}

/// Zeroed accumulators around a starting model built from `first_batch`.
pub fn init_streaming(first_batch: &FeatureBatch, k: usize, lambda: f64, init: &InitSpec) -> Result<EmaState> {
    check_lambda(lambda)?;
    let gmm = initialize(first_batch, k, init)?;
    EmaState::new(gmm, lambda)
}

/// The M-step restricted to one mini-batch, with responsibilities from
/// `current`. Components with no effective mass in the batch carry
/// `current`'s mean and variance forward.
pub fn batch_estimates(current: &DiagGmm, batch: &FeatureBatch) -> Result<BatchEstimates> {
    check_dim("batch_estimates features", current.dim(), batch.dim())?;
    if batch.is_empty() {
        return Err(FveError::InvalidParameter("empty mini-batch".into()));
    }
    let (assign, ll) = assign_rows(&current.kernel(), batch.data());
    let step = m_step(batch.data(), &assign, current);
    let mut variances = step.variances;
    variances.mapv_inplace(|v| v.max(VAR_FLOOR));
    Ok(BatchEstimates {
        weights: step.weights,
        means: step.means,
        variances,
        counts: step.counts,
        log_likelihood: ll.iter().sum::<f64>() / ll.len() as f64,
    })
}

/// Functional form of [`EmaState::update`].
pub fn ema_update(state: &EmaState, est: &BatchEstimates) -> Result<EmaState> {
    let mut next = state.clone();
    next.update(est)?;
    Ok(next)
}

/// Functional form of [`EmaState::bias_corrected`].
pub fn bias_corrected(state: &EmaState) -> Result<DiagGmm> {
    state.bias_corrected()
}

/// Functional form of [`EmaState::step`].
pub fn streaming_step(state: &EmaState, batch: &FeatureBatch) -> Result<EmaState> {
    let mut next = state.clone();
    next.step(batch)?;
    Ok(next)
}

/// A seeded streaming fit over random mini-batches of one dataset.
#[derive(Debug, Clone)]
pub struct StreamingFit {
    pub state: EmaState,
    /// Mean log-likelihood of the whole dataset under the debiased model
    /// after each step.
    pub trace: Vec<f64>,
}

/// Runs `steps` streaming EM updates, each on `batch_size` rows drawn
/// without replacement from `data`. The starting model is built from the
/// first drawn batch.
pub fn fit_streaming(
    data: &FeatureBatch,
    k: usize,
    lambda: f64,
    batch_size: usize,
    steps: usize,
    init: &InitSpec,
    seed: u64,
) -> Result<StreamingFit> {
    use rand::seq::index::sample;
    use rand::SeedableRng;

    if batch_size == 0 || steps == 0 {
        return Err(FveError::InvalidParameter("batch_size and steps must be positive".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let size = batch_size.min(data.len());
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        let mut idx = sample(rng, data.len(), size).into_vec();
        idx.sort_unstable();
        data.select(&idx)
    };
    let mut batch = draw(&mut rng);
    let mut state = init_streaming(&batch, k, lambda, init)?;
    let mut trace = Vec::with_capacity(steps);
    for step in 0..steps {
        if step > 0 {
            batch = draw(&mut rng);
        }
        state.step(&batch)?;
        trace.push(crate::gmm::mean_log_likelihood(&state.bias_corrected()?, data)?);
    }
    Ok(StreamingFit { state, trace })
}
