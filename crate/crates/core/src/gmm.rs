//! Diagonal-covariance Gaussian mixtures: densities, soft assignments and the
//! classical full-batch EM estimator.
//!
//! All likelihood work happens in log space. A component's log joint for a
//! sample is `ln α_k + ln p_k(x)`, and responsibilities are obtained with a
//! max-shifted log-sum-exp, so nothing under- or overflows for large `D`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::batch::FeatureBatch;
use crate::error::{check_dim, FveError, Result};
use crate::exec;
use crate::init::{initialize, InitSpec};

/// Smallest variance any component may carry, per dimension.
pub const VAR_FLOOR: f64 = 1e-6;

/// A component is treated as empty when its effective count is below
/// `COUNT_EPS * N`.
pub const COUNT_EPS: f64 = 1e-8;

/// Mixture weights, means and per-dimension variances of a `K`-component
/// diagonal Gaussian mixture over `D`-dimensional features.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGmm {
    weights: Array1<f64>,
    means: Array2<f64>,
    variances: Array2<f64>,
}

impl DiagGmm {
    /// Validates and builds a mixture.
    ///
    /// Weights must be finite, nonnegative and sum to one within `1e-9`; they
    /// are then rescaled to sum to one exactly. Variances must be positive and
    /// are raised to [`VAR_FLOOR`] where below it.
    pub fn new(weights: Array1<f64>, means: Array2<f64>, variances: Array2<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.ncols() == 0 {
            return Err(FveError::InvalidModel("K and D must be at least 1".into()));
        }
        check_dim("mixture means rows", k, means.nrows())?;
        check_dim("mixture variances rows", k, variances.nrows())?;
        check_dim("mixture variances cols", means.ncols(), variances.ncols())?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(FveError::InvalidModel(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(FveError::InvalidModel(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(FveError::InvalidModel("means must be finite".into()));
        }
        if variances.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(FveError::InvalidModel(
                "variances must be finite and positive".into(),
            ));
        }
        let mut gmm = Self {
            weights: weights / total,
            means,
            variances,
        };
        gmm.apply_floor();
        Ok(gmm)
    }

    /// Builds from parts the caller has already brought into a valid state.
    pub(crate) fn from_parts(weights: Array1<f64>, means: Array2<f64>, variances: Array2<f64>) -> Self {
        debug_assert_eq!(weights.len(), means.nrows());
        Self {
            weights,
            means,
            variances,
        }
    }

    /// A single standard-normal-like component with the given mean and
    /// variance, handy for tests and the one-component reduction.
    pub fn single(mean: &[f64], variance: &[f64]) -> Result<Self> {
        let d = mean.len();
        Self::new(
            Array1::ones(1),
            Array2::from_shape_vec((1, d), mean.to_vec())
                .map_err(|e| FveError::InvalidModel(e.to_string()))?,
            Array2::from_shape_vec((1, variance.len()), variance.to_vec())
                .map_err(|e| FveError::InvalidModel(e.to_string()))?,
        )
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn means(&self) -> ArrayView2<'_, f64> {
        self.means.view()
    }

    pub fn variances(&self) -> ArrayView2<'_, f64> {
        self.variances.view()
    }

    /// Raises every variance below [`VAR_FLOOR`]; returns how many were raised.
    pub(crate) fn apply_floor(&mut self) -> usize {
        let mut raised = 0;
        for v in self.variances.iter_mut() {
            if *v < VAR_FLOOR {
                *v = VAR_FLOOR;
                raised += 1;
            }
        }
        raised
    }

    pub(crate) fn kernel(&self) -> Kernel {
        Kernel::new(self)
    }
}

/// Per-call precomputation of the quantities every density evaluation
/// needs: log weights, log normalizers and inverse variances.
pub(crate) struct Kernel {
    pub log_weights: Vec<f64>,
    pub log_norm: Vec<f64>,
    pub means: Array2<f64>,
    pub inv_var: Array2<f64>,
}

impl Kernel {
    fn new(gmm: &DiagGmm) -> Self {
        let log_norm = gmm
            .variances
            .rows()
            .into_iter()
            .map(|v| -0.5 * v.iter().map(|s2| (2.0 * PI * s2).ln()).sum::<f64>())
            .collect();
        Self {
            log_weights: gmm.weights.iter().map(|w| w.ln()).collect(),
            log_norm,
            means: gmm.means.clone(),
            inv_var: gmm.variances.mapv(|v| 1.0 / v),
        }
    }

    pub fn k(&self) -> usize {
        self.log_weights.len()
    }

    /// `ln p_k(x)` for every component.
    pub fn log_density_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let mu = self.means.row(k);
            let iv = self.inv_var.row(k);
            let mut q = 0.0;
            for d in 0..x.len() {
                let diff = x[d] - mu[d];
                q += diff * diff * iv[d];
            }
            *o = self.log_norm[k] - 0.5 * q;
        }
    }

    /// Fills `w` with the responsibilities of `x` and returns
    /// `ln Σ_k α_k p_k(x)`.
    pub fn assign_row(&self, x: ArrayView1<'_, f64>, w: &mut [f64]) -> f64 {
        self.log_density_into(x, w);
        let mut max = f64::NEG_INFINITY;
        for (k, v) in w.iter_mut().enumerate() {
            *v += self.log_weights[k];
            if *v > max {
                max = *v;
            }
        }
        let mut total = 0.0;
        for v in w.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in w.iter_mut() {
            *v /= total;
        }
        max + total.ln()
    }
}

/// Soft assignments of N samples to K components and the per-component
/// effective counts `N_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub assign: Array2<f64>,
    pub counts: Array1<f64>,
}

/// `ln p_k(x | θ_k)` for each component.
pub fn log_component_density(gmm: &DiagGmm, x: &[f64]) -> Result<Vec<f64>> {
    check_dim("log_component_density input", gmm.dim(), x.len())?;
    let mut out = vec![0.0; gmm.k()];
    gmm.kernel()
        .log_density_into(ArrayView1::from(x), &mut out);
    Ok(out)
}

/// Responsibility matrix plus the per-row log mixture density.
pub(crate) fn assign_rows(kernel: &Kernel, data: ArrayView2<'_, f64>) -> (Array2<f64>, Vec<f64>) {
    let n = data.nrows();
    let k = kernel.k();
    let mut assign = Array2::<f64>::zeros((n, k));
    let mut loglik = vec![0.0; n];
    let fill = |(row_out, ll): (&mut [f64], &mut f64), i: usize| {
        *ll = kernel.assign_row(data.row(i), row_out);
    };
    let flat = assign
        .as_slice_mut()
        .expect("freshly allocated responsibility matrix is contiguous");
    if exec::is_deterministic() {
        for (i, (row, ll)) in flat.chunks_mut(k).zip(loglik.iter_mut()).enumerate() {
            fill((row, ll), i);
        }
    } else {
        flat.par_chunks_mut(k)
            .zip(loglik.par_iter_mut())
            .enumerate()
            .for_each(|(i, pair)| fill(pair, i));
    }
    (assign, loglik)
}

fn column_counts(assign: &Array2<f64>) -> Array1<f64> {
    let k = assign.ncols();
    let counts = exec::accumulate(assign.nrows(), k, None, |i, acc| {
        for (a, w) in acc.iter_mut().zip(assign.row(i)) {
            *a += w;
        }
    });
    Array1::from(counts)
}

/// E-step: `w_{n,k} = α_k p_k(x_n) / Σ_ℓ α_ℓ p_ℓ(x_n)`.
pub fn soft_assign(gmm: &DiagGmm, batch: &FeatureBatch) -> Result<Responsibilities> {
    check_dim("soft_assign features", gmm.dim(), batch.dim())?;
    let (assign, _) = assign_rows(&gmm.kernel(), batch.data());
    let counts = column_counts(&assign);
    Ok(Responsibilities { assign, counts })
}

/// `(1/N) Σ_n ln Σ_k α_k p_k(x_n)`.
pub fn mean_log_likelihood(gmm: &DiagGmm, batch: &FeatureBatch) -> Result<f64> {
    check_dim("mean_log_likelihood features", gmm.dim(), batch.dim())?;
    if batch.is_empty() {
        return Err(FveError::InvalidParameter("empty batch".into()));
    }
    let kernel = gmm.kernel();
    let k = gmm.k();
    let data = batch.data();
    let total = exec::accumulate(batch.len(), 1, None, |i, acc| {
        let mut w = vec![0.0; k];
        acc[0] += kernel.assign_row(data.row(i), &mut w);
    });
    Ok(total[0] / batch.len() as f64)
}

/// Output of one M-step over a responsibility matrix.
#[derive(Debug, Clone)]
pub(crate) struct MStep {
    pub weights: Array1<f64>,
    pub means: Array2<f64>,
    pub variances: Array2<f64>,
    pub counts: Array1<f64>,
    /// Components whose effective count fell below `COUNT_EPS * N`. Their
    /// mean and variance rows are copied from `fallback`.
    pub empty: Vec<usize>,
}

/// Weighted moments: `α = N_k/N`, `μ = Σ w x / N_k`, `σ² = Σ w (x-μ)² / N_k`
/// (biased). Empty components take their mean and variance from `fallback`.
pub(crate) fn m_step(data: ArrayView2<'_, f64>, assign: &Array2<f64>, fallback: &DiagGmm) -> MStep {
    let n = data.nrows();
    let d = data.ncols();
    let k = assign.ncols();

    let first = exec::accumulate(n, k + k * d, None, |i, acc| {
        let x = data.row(i);
        let w = assign.row(i);
        let (cnt, sums) = acc.split_at_mut(k);
        for c in 0..k {
            cnt[c] += w[c];
            let s = &mut sums[c * d..(c + 1) * d];
            for j in 0..d {
                s[j] += w[c] * x[j];
            }
        }
    });
    let counts = Array1::from(first[..k].to_vec());
    let threshold = COUNT_EPS * n as f64;
    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] < threshold).collect();

    let mut means = Array2::<f64>::zeros((k, d));
    for c in 0..k {
        if empty.contains(&c) {
            means.row_mut(c).assign(&fallback.means.row(c));
        } else {
            for j in 0..d {
                means[[c, j]] = first[k + c * d + j] / counts[c];
            }
        }
    }

    let second = exec::accumulate(n, k * d, None, |i, acc| {
        let x = data.row(i);
        let w = assign.row(i);
        for c in 0..k {
            let s = &mut acc[c * d..(c + 1) * d];
            for j in 0..d {
                let diff = x[j] - means[[c, j]];
                s[j] += w[c] * diff * diff;
            }
        }
    });
    let mut variances = Array2::<f64>::zeros((k, d));
    for c in 0..k {
        if empty.contains(&c) {
            variances.row_mut(c).assign(&fallback.variances.row(c));
        } else {
            for j in 0..d {
                variances[[c, j]] = second[c * d + j] / counts[c];
            }
        }
    }

    let weights = counts.mapv(|c| c / n as f64);
    MStep {
        weights,
        means,
        variances,
        counts,
        empty,
    }
}

/// Something that happened during an EM iteration which exempts it from the
/// monotone-likelihood guarantee.
#[derive(Debug, Clone, PartialEq)]
pub enum EmEvent {
    /// Component was empty and its mean was moved to a poorly explained sample.
    Reseed { iteration: usize, component: usize, sample: usize },
    /// `count` variances were raised to [`VAR_FLOOR`].
    VarianceFloor { iteration: usize, count: usize },
}

impl EmEvent {
    pub fn iteration(&self) -> usize {
        match self {
            EmEvent::Reseed { iteration, .. } | EmEvent::VarianceFloor { iteration, .. } => *iteration,
        }
    }
}

/// Likelihood history of a full-batch EM run.
#[derive(Debug, Clone, PartialEq)]
pub struct EmTrace {
    /// Mean log-likelihood of the initial model.
    pub initial: f64,
    /// Mean log-likelihood after each iteration's M-step.
    pub log_likelihood: Vec<f64>,
    pub events: Vec<EmEvent>,
    pub converged: bool,
}

impl EmTrace {
    pub fn iterations(&self) -> usize {
        self.log_likelihood.len()
    }

    pub fn is_flagged(&self, iteration: usize) -> bool {
        self.events.iter().any(|e| e.iteration() == iteration)
    }

    pub fn last(&self) -> f64 {
        self.log_likelihood.last().copied().unwrap_or(self.initial)
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub gmm: DiagGmm,
    pub trace: EmTrace,
}

/// Full-batch EM: alternate E- and M-steps until the mean log-likelihood
/// changes by less than `tol`, or `max_iters` iterations have run.
pub fn em_full(
    batch: &FeatureBatch,
    k: usize,
    init: &InitSpec,
    max_iters: usize,
    tol: f64,
) -> Result<EmFit> {
    if max_iters == 0 {
        return Err(FveError::InvalidParameter("max_iters must be positive".into()));
    }
    if !(tol > 0.0) {
        return Err(FveError::InvalidParameter("tol must be positive".into()));
    }
    let gmm = initialize(batch, k, init)?;
    em_from(batch, gmm, max_iters, tol)
}

/// Full-batch EM from a given starting model.
pub fn em_from(batch: &FeatureBatch, mut gmm: DiagGmm, max_iters: usize, tol: f64) -> Result<EmFit> {
    check_dim("em features", gmm.dim(), batch.dim())?;
    let data = batch.data();
    let n = batch.len();

    let (mut assign, ll) = assign_rows(&gmm.kernel(), data);
    let initial = mean_of(&ll);
    let mut trace = EmTrace {
        initial,
        log_likelihood: Vec::with_capacity(max_iters),
        events: Vec::new(),
        converged: false,
    };
    let mut prev = initial;

    for iteration in 0..max_iters {
        let step = m_step(data, &assign, &gmm);
        let mut weights = step.weights;
        let mut means = step.means;
        let variances = step.variances;

        if !step.empty.is_empty() {
            // Reseed onto the samples the current model explains worst.
            let mut order: Vec<usize> = (0..n).collect();
            let max_resp = |i: usize| assign.row(i).iter().cloned().fold(0.0, f64::max);
            order.sort_by(|&a, &b| max_resp(a).total_cmp(&max_resp(b)).then(a.cmp(&b)));
            for (slot, &c) in step.empty.iter().enumerate() {
                let sample = order[slot % n];
                means.row_mut(c).assign(&data.row(sample));
                weights[c] = 1.0 / n as f64;
                trace.events.push(EmEvent::Reseed {
                    iteration,
                    component: c,
                    sample,
                });
            }
            let total = weights.sum();
            weights /= total;
        }

        let mut next = DiagGmm::from_parts(weights, means, variances);
        let floored = next.apply_floor();
        if floored > 0 {
            trace.events.push(EmEvent::VarianceFloor {
                iteration,
                count: floored,
            });
        }
        gmm = next;

        let (a, ll) = assign_rows(&gmm.kernel(), data);
        assign = a;
        let cur = mean_of(&ll);
        trace.log_likelihood.push(cur);
        if (cur - prev).abs() < tol {
            trace.converged = true;
            break;
        }
        prev = cur;
    }
    Ok(EmFit { gmm, trace })
}

fn mean_of(values: &[f64]) -> f64 {
    let total = exec::accumulate(values.len(), 1, None, |i, acc| acc[0] += values[i]);
    total[0] / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::InitStrategy;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn two_comp(mu: [f64; 2]) -> DiagGmm {
        DiagGmm::new(array![0.5, 0.5], array![[mu[0]], [mu[1]]], array![[1.0], [1.0]]).unwrap()
    }

    #[test]
    fn standard_normal_at_mode() {
        let g = DiagGmm::single(&[0.0], &[1.0]).unwrap();
        let l = log_component_density(&g, &[0.0]).unwrap();
        assert_abs_diff_eq!(l[0], -0.918_938_533_204_672_7, epsilon = 1e-15);
    }

    #[test]
    fn independent_dims_add() {
        let g = DiagGmm::single(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let l = log_component_density(&g, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(l[0], -(2.0 * PI).ln(), epsilon = 1e-14);
    }

    #[test]
    fn two_component_scalar_density() {
        let g = two_comp([0.0, 2.0]);
        let l = log_component_density(&g, &[0.5]).unwrap();
        let base = -0.5 * (2.0 * PI).ln();
        assert_abs_diff_eq!(l[0], base - 0.125, epsilon = 1e-14);
        assert_abs_diff_eq!(l[1], base - 1.125, epsilon = 1e-14);
    }

    #[test]
    fn density_dimension_mismatch() {
        let g = DiagGmm::single(&[0.0], &[1.0]).unwrap();
        let err = log_component_density(&g, &[0.0, 1.0]).unwrap_err();
        assert_eq!(err.kind(), "dimension_mismatch");
    }

    #[test]
    fn soft_assign_examples() {
        let single = DiagGmm::single(&[3.0], &[2.0]).unwrap();
        let b = FeatureBatch::from_rows(&[vec![-7.0], vec![100.0]]).unwrap();
        let r = soft_assign(&single, &b).unwrap();
        assert_eq!(r.assign, array![[1.0], [1.0]]);

        let sym = two_comp([-1.0, 1.0]);
        let b = FeatureBatch::from_rows(&[vec![0.0]]).unwrap();
        let r = soft_assign(&sym, &b).unwrap();
        assert_abs_diff_eq!(r.assign[[0, 0]], 0.5, epsilon = 1e-15);

        // Density ratio: exp(-0.125) / exp(-1.125) = e, so w0 = 1/(1+e^-1).
        let g = two_comp([0.0, 2.0]);
        let b = FeatureBatch::from_rows(&[vec![0.5]]).unwrap();
        let r = soft_assign(&g, &b).unwrap();
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert_abs_diff_eq!(r.assign[[0, 0]], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(r.assign[[0, 1]], 1.0 - expected, epsilon = 1e-12);
        assert_abs_diff_eq!(r.counts.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn far_away_samples_do_not_underflow() {
        let g = DiagGmm::new(
            array![0.5, 0.5],
            Array2::zeros((2, 200)),
            Array2::from_elem((2, 200), VAR_FLOOR),
        )
        .unwrap();
        let b = FeatureBatch::new(Array2::from_elem((3, 200), 50.0)).unwrap();
        let r = soft_assign(&g, &b).unwrap();
        assert!(r.assign.iter().all(|w| w.is_finite()));
        assert!(mean_log_likelihood(&g, &b).unwrap().is_finite());
    }

    #[test]
    fn identical_components_collapse() {
        let a = DiagGmm::single(&[0.3, -1.0], &[0.5, 2.0]).unwrap();
        let b = DiagGmm::new(
            array![0.5, 0.5],
            array![[0.3, -1.0], [0.3, -1.0]],
            array![[0.5, 2.0], [0.5, 2.0]],
        )
        .unwrap();
        let x = FeatureBatch::from_rows(&[vec![0.1, 0.2], vec![1.0, -3.0]]).unwrap();
        assert_abs_diff_eq!(
            mean_log_likelihood(&a, &x).unwrap(),
            mean_log_likelihood(&b, &x).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn single_normal_likelihood() {
        let g = DiagGmm::single(&[0.0], &[1.0]).unwrap();
        let b = FeatureBatch::from_rows(&[vec![0.0]]).unwrap();
        assert_abs_diff_eq!(mean_log_likelihood(&g, &b).unwrap(), -0.5 * (2.0 * PI).ln(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(DiagGmm::new(array![0.5, 0.6], Array2::zeros((2, 1)), Array2::ones((2, 1))).is_err());
        assert!(DiagGmm::new(array![1.0], Array2::zeros((1, 1)), array![[0.0]]).is_err());
        assert!(DiagGmm::new(array![-0.5, 1.5], Array2::zeros((2, 1)), Array2::ones((2, 1))).is_err());
        let g = DiagGmm::new(array![1.0], Array2::zeros((1, 2)), array![[1e-9, 1.0]]).unwrap();
        assert_eq!(g.variances()[[0, 0]], VAR_FLOOR);
    }

    #[test]
    fn one_component_em_is_mean_and_biased_variance() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, -2.0], vec![-1.0, 0.5], vec![5.0, 1.5]];
        let b = FeatureBatch::from_rows(&rows).unwrap();
        let fit = em_full(&b, 1, &InitSpec::new(InitStrategy::RandomSubset, 3), 20, 1e-10).unwrap();
        let mean0 = (1.0 + 3.0 - 1.0 + 5.0) / 4.0;
        let var0 = rows.iter().map(|r| (r[0] - mean0).powi(2)).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(fit.gmm.means()[[0, 0]], mean0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.gmm.variances()[[0, 0]], var0, epsilon = 1e-12);
        assert_eq!(fit.gmm.weights()[0], 1.0);
    }

    #[test]
    fn repeated_point_hits_floor() {
        let p = vec![0.25, -4.0, 7.0];
        let b = FeatureBatch::from_rows(&vec![p.clone(); 10]).unwrap();
        let fit = em_full(&b, 1, &InitSpec::new(InitStrategy::KMeansPlusPlus, 1), 5, 1e-9).unwrap();
        for j in 0..3 {
            assert_eq!(fit.gmm.means()[[0, j]], p[j]);
            assert_eq!(fit.gmm.variances()[[0, j]], VAR_FLOOR);
        }
    }

    #[test]
    fn degenerate_two_clusters_recovered() {
        let mut rows = vec![vec![-1.0, 0.0]; 200];
        rows.extend(vec![vec![1.0, 0.0]; 200]);
        let b = FeatureBatch::from_rows(&rows).unwrap();
        let fit = em_full(&b, 2, &InitSpec::new(InitStrategy::RandomSubset, 11), 100, 1e-12).unwrap();
        let m = fit.gmm.means();
        let (lo, hi) = if m[[0, 0]] < m[[1, 0]] { (0, 1) } else { (1, 0) };
        assert_abs_diff_eq!(m[[lo, 0]], -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m[[hi, 0]], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m[[lo, 1]], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.gmm.weights()[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn empty_component_is_reseeded() {
        // Second component sits far away and gets no mass.
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1]).collect();
        let b = FeatureBatch::from_rows(&rows).unwrap();
        let start = DiagGmm::new(array![0.5, 0.5], array![[1.0], [1e6]], array![[1.0], [1e-6]]).unwrap();
        let fit = em_from(&b, start, 3, 1e-12).unwrap();
        assert!(fit
            .trace
            .events
            .iter()
            .any(|e| matches!(e, EmEvent::Reseed { iteration: 0, component: 1, .. })));
        assert!(fit.gmm.means()[[1, 0]] < 10.0);
        assert_abs_diff_eq!(fit.gmm.weights().sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_em_arguments() {
        let b = FeatureBatch::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let init = InitSpec::new(InitStrategy::RandomSubset, 0);
        assert!(em_full(&b, 1, &init, 0, 1e-6).is_err());
        assert!(em_full(&b, 1, &init, 10, 0.0).is_err());
        assert!(em_full(&b, 3, &init, 10, 1e-6).is_err());
    }
}
