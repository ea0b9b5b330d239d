//! Fisher vector encoding of a feature set and its input gradient.
//!
//! For a set of `N` rows and a mixture with weights `α`, means `μ` and
//! standard deviations `σ`, with `z = (x - μ_k) / σ_k` and responsibilities
//! `w_{n,k}`:
//!
//! ```text
//! Fμ[k,d] = 1/√(N α_k)  · Σ_n w_{n,k} · z_{n,k,d}
//! Fσ[k,d] = 1/√(2N α_k) · Σ_n w_{n,k} · (z_{n,k,d}² - 1)
//! ```
//!
//! The output is laid out as all `Fμ` blocks (component-major, dimension
//! minor) followed by all `Fσ` blocks, `2·K·D` values in total.
//!
//! The backward pass treats the mixture as constant. Row `n` only enters its
//! own summand, so the gradient of row `n` depends on row `n` alone:
//!
//! ```text
//! ∂Fμ[k,d]/∂x[n,e] = a_k (∂w_{n,k}/∂x[n,e] · z_{n,k,d} + δ_{d,e} w_{n,k} / σ_{k,e})
//! ∂Fσ[k,d]/∂x[n,e] = b_k (∂w_{n,k}/∂x[n,e] · (z_{n,k,d}² - 1)
//!                         + δ_{d,e} · 2 w_{n,k} (x[n,e] - μ_{k,e}) / σ²_{k,e})
//! ∂w_{n,k}/∂x[n,e] = w_{n,k} (-r_{n,k,e} + Σ_ℓ w_{n,ℓ} r_{n,ℓ,e}),   r = (x - μ) / σ²
//! ```
//!
//! [`encode_vjp`] contracts these with an upstream cotangent without forming
//! the Jacobian; the responsibility term collapses to one scalar per
//! component, so the cost is `O(N·K·D)`.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::batch::FeatureBatch;
use crate::error::{check_dim, FveError, Result};
use crate::exec;
use crate::gmm::{DiagGmm, Kernel};

/// A `2·K·D` Fisher vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherVector {
    values: Vec<f64>,
    k: usize,
    d: usize,
}

impl FisherVector {
    pub fn from_values(values: Vec<f64>, k: usize, d: usize) -> Result<Self> {
        check_dim("fisher vector length", 2 * k * d, values.len())?;
        Ok(Self { values, k, d })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn mu(&self, k: usize, d: usize) -> f64 {
        self.values[mu_index(k, d, self.d)]
    }

    pub fn sigma(&self, k: usize, d: usize) -> f64 {
        self.values[sigma_index(k, d, self.k, self.d)]
    }

    /// Column names matching the value layout: `mu_k{k}_d{d}` then
    /// `sigma_k{k}_d{d}`, zero-based.
    pub fn column_names(k: usize, d: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(2 * k * d);
        for prefix in ["mu", "sigma"] {
            for c in 0..k {
                for j in 0..d {
                    names.push(format!("{prefix}_k{c}_d{j}"));
                }
            }
        }
        names
    }
}

#[inline]
fn mu_index(k: usize, d: usize, dim: usize) -> usize {
    k * dim + d
}

#[inline]
fn sigma_index(k: usize, d: usize, kk: usize, dim: usize) -> usize {
    kk * dim + k * dim + d
}

/// `∂L/∂x` for every row of an encoded set.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradient {
    pub grad: Array2<f64>,
}

/// Per-component normalizers `1/√(N α_k)` and `1/√(2 N α_k)`; zero for
/// weightless components, whose scores are identically zero.
fn normalizers(gmm: &DiagGmm, n: usize) -> (Vec<f64>, Vec<f64>) {
    gmm.weights()
        .iter()
        .map(|&a| {
            if a > 0.0 {
                let base = n as f64 * a;
                (1.0 / base.sqrt(), 1.0 / (2.0 * base).sqrt())
            } else {
                (0.0, 0.0)
            }
        })
        .unzip()
}

/// Row indices in lexicographic order of row values. Accumulating in this
/// order makes the encoding independent of how the set was listed.
fn canonical_order(set: ArrayView2<'_, f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..set.nrows()).collect();
    order.sort_by(|&a, &b| {
        set.row(a)
            .iter()
            .zip(set.row(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    order
}

fn check_set(gmm: &DiagGmm, set: ArrayView2<'_, f64>) -> Result<()> {
    check_dim("encoded set features", gmm.dim(), set.ncols())?;
    if set.nrows() == 0 {
        return Err(FveError::EmptyGroup(0));
    }
    if set.iter().any(|v| !v.is_finite()) {
        return Err(FveError::InvalidParameter("encoded set contains non-finite values".into()));
    }
    Ok(())
}

/// Encodes one image's feature set (`N_I × D`, `N_I ≥ 1`).
pub fn encode(gmm: &DiagGmm, set: ArrayView2<'_, f64>) -> Result<FisherVector> {
    check_set(gmm, set)?;
    let (k, d, n) = (gmm.k(), gmm.dim(), set.nrows());
    let kernel = gmm.kernel();
    let inv_sd = gmm.variances().mapv(|v| 1.0 / v.sqrt());
    let means = gmm.means();

    let order = exec::is_deterministic().then(|| canonical_order(set));
    let sums = exec::accumulate(n, 2 * k * d, order.as_deref(), |i, acc| {
        let x = set.row(i);
        let mut w = vec![0.0; k];
        kernel.assign_row(x, &mut w);
        let (acc_mu, acc_sigma) = acc.split_at_mut(k * d);
        for c in 0..k {
            for j in 0..d {
                let z = (x[j] - means[[c, j]]) * inv_sd[[c, j]];
                acc_mu[c * d + j] += w[c] * z;
                acc_sigma[c * d + j] += w[c] * (z * z - 1.0);
            }
        }
    });

    let (a, b) = normalizers(gmm, n);
    let mut values = sums;
    for c in 0..k {
        for j in 0..d {
            values[mu_index(c, j, d)] *= a[c];
            values[sigma_index(c, j, k, d)] *= b[c];
        }
    }
    Ok(FisherVector { values, k, d })
}

/// Encodes every group of `batch`, in order of first appearance.
pub fn encode_groups(gmm: &DiagGmm, batch: &FeatureBatch) -> Result<Vec<(u64, FisherVector)>> {
    let groups = batch.group_rows();
    let run = |g: &crate::batch::GroupRows| -> Result<(u64, FisherVector)> {
        let set = batch.data().select(Axis(0), &g.rows);
        encode(gmm, set.view())
            .map(|fv| (g.id, fv))
            .map_err(|e| match e {
                FveError::EmptyGroup(_) => FveError::EmptyGroup(g.id),
                other => other,
            })
    };
    if exec::is_deterministic() {
        groups.iter().map(run).collect()
    } else {
        groups.par_iter().map(run).collect()
    }
}

fn vjp_row(
    kernel: &Kernel,
    gmm: &DiagGmm,
    inv_sd: &Array2<f64>,
    a: &[f64],
    b: &[f64],
    x: ArrayView1<'_, f64>,
    upstream: &[f64],
    out: &mut [f64],
) {
    let (k, d) = (gmm.k(), gmm.dim());
    let means = gmm.means();
    let inv_var = &kernel.inv_var;
    let (g_mu, g_sigma) = upstream.split_at(k * d);

    let mut w = vec![0.0; k];
    kernel.assign_row(x, &mut w);

    // c_k: the upstream contracted with each component's score, i.e. the
    // coefficient multiplying ∂w_k/∂x.
    let mut coef = vec![0.0; k];
    for c in 0..k {
        let mut s = 0.0;
        for j in 0..d {
            let z = (x[j] - means[[c, j]]) * inv_sd[[c, j]];
            s += g_mu[c * d + j] * a[c] * z + g_sigma[c * d + j] * b[c] * (z * z - 1.0);
        }
        coef[c] = s;
    }
    let total: f64 = coef.iter().zip(&w).map(|(c, w)| c * w).sum();

    for (e, o) in out.iter_mut().enumerate() {
        let mut r_bar = 0.0;
        let mut through_w = 0.0;
        let mut direct = 0.0;
        for c in 0..k {
            let diff = x[e] - means[[c, e]];
            let r = diff * inv_var[[c, e]];
            r_bar += w[c] * r;
            through_w -= coef[c] * w[c] * r;
            direct += g_mu[c * d + e] * a[c] * w[c] * inv_sd[[c, e]]
                + g_sigma[c * d + e] * b[c] * 2.0 * w[c] * r;
        }
        *o = through_w + total * r_bar + direct;
    }
}

/// Vector-Jacobian product of [`encode`] with respect to the set's rows.
pub fn encode_vjp(gmm: &DiagGmm, set: ArrayView2<'_, f64>, upstream: &[f64]) -> Result<InputGradient> {
    check_set(gmm, set)?;
    let (k, d, n) = (gmm.k(), gmm.dim(), set.nrows());
    check_dim("encode_vjp upstream", 2 * k * d, upstream.len())?;
    if upstream.iter().any(|v| !v.is_finite()) {
        return Err(FveError::InvalidParameter("upstream gradient is not finite".into()));
    }
    let kernel = gmm.kernel();
    let inv_sd = gmm.variances().mapv(|v| 1.0 / v.sqrt());
    let (a, b) = normalizers(gmm, n);

    let mut grad = Array2::<f64>::zeros((n, d));
    let flat = grad.as_slice_mut().expect("fresh gradient is contiguous");
    let body = |(i, out): (usize, &mut [f64])| {
        vjp_row(&kernel, gmm, &inv_sd, &a, &b, set.row(i), upstream, out);
    };
    if exec::is_deterministic() {
        flat.chunks_mut(d).enumerate().for_each(body);
    } else {
        flat.par_chunks_mut(d).enumerate().for_each(body);
    }
    Ok(InputGradient { grad })
}

/// The full `(2KD) × (N·D)` Jacobian assembled from one VJP per output
/// coordinate. Column `n·D + e` holds `∂F/∂x[n,e]`.
pub fn analytic_jacobian(gmm: &DiagGmm, set: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let m = 2 * gmm.k() * gmm.dim();
    let cols = set.len();
    let mut jac = Array2::<f64>::zeros((m, cols));
    let mut unit = vec![0.0; m];
    for r in 0..m {
        unit[r] = 1.0;
        let g = encode_vjp(gmm, set, &unit)?;
        for (c, v) in g.grad.iter().enumerate() {
            jac[[r, c]] = *v;
        }
        unit[r] = 0.0;
    }
    Ok(jac)
}

/// Central-difference Jacobian of [`encode`], laid out as
/// [`analytic_jacobian`].
pub fn jacobian_fd(gmm: &DiagGmm, set: ArrayView2<'_, f64>, eps: f64) -> Result<Array2<f64>> {
    if !(eps > 0.0) {
        return Err(FveError::InvalidParameter("eps must be positive".into()));
    }
    let mut x = set.to_owned();
    let (n, d) = (x.nrows(), x.ncols());
    let m = 2 * gmm.k() * gmm.dim();
    let mut jac = Array2::<f64>::zeros((m, n * d));
    for i in 0..n {
        for e in 0..d {
            let orig = x[[i, e]];
            x[[i, e]] = orig + eps;
            let plus = encode(gmm, x.view())?;
            x[[i, e]] = orig - eps;
            let minus = encode(gmm, x.view())?;
            x[[i, e]] = orig;
            for r in 0..m {
                jac[[r, i * d + e]] = (plus.values[r] - minus.values[r]) / (2.0 * eps);
            }
        }
    }
    Ok(jac)
}

/// `‖a - b‖_F / max(‖a‖_F, ‖b‖_F)`, or the absolute error when both are tiny.
pub fn relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = (a - b).mapv(|v| v * v).sum().sqrt();
    let scale = a.mapv(|v| v * v).sum().sqrt().max(b.mapv(|v| v * v).sum().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Optional signed square root, then optional L2 normalization.
pub fn normalize_fv(fv: &FisherVector, apply_power: bool, apply_l2: bool) -> FisherVector {
    let mut values = fv.values.clone();
    if apply_power {
        values.iter_mut().for_each(|v| *v = v.signum() * v.abs().sqrt());
    }
    if apply_l2 {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= 1e-12 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
    }
    FisherVector {
        values,
        k: fv.k,
        d: fv.d,
    }
}

/// A random but well-conditioned mixture and a feature set drawn around it,
/// used by gradient checks.
pub fn random_instance(k: usize, d: usize, n: usize, rng: &mut ChaCha8Rng) -> (DiagGmm, Array2<f64>) {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = ndarray::Array1::from_iter(raw.iter().map(|w| w / total));
    let means = Array2::from_shape_fn((k, d), |_| StandardNormal.sample(rng));
    let variances = Array2::from_shape_fn((k, d), |_| rng.random_range(0.3..2.0));
    let gmm = DiagGmm::new(weights, means, variances).expect("random mixture is valid");
    let mut set = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        let c = rng.random_range(0..k);
        for j in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            set[[i, j]] = gmm.means()[[c, j]] + z * gmm.variances()[[c, j]].sqrt();
        }
    }
    (gmm, set)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckConfig {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub trials: usize,
    pub eps: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            k: 2,
            d: 3,
            n: 4,
            trials: 20,
            eps: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub trials: usize,
    pub max_relative_error: f64,
    pub errors: Vec<f64>,
}

/// Compares [`analytic_jacobian`] against [`jacobian_fd`] on seeded random
/// instances.
pub fn gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    if cfg.k == 0 || cfg.d == 0 || cfg.n == 0 || cfg.trials == 0 {
        return Err(FveError::InvalidParameter("k, d, n and trials must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut errors = Vec::with_capacity(cfg.trials);
    for _ in 0..cfg.trials {
        let (gmm, set) = random_instance(cfg.k, cfg.d, cfg.n, &mut rng);
        let analytic = analytic_jacobian(&gmm, set.view())?;
        let numeric = jacobian_fd(&gmm, set.view(), cfg.eps)?;
        errors.push(relative_error(&analytic, &numeric));
    }
    let max_relative_error = errors.iter().cloned().fold(0.0, f64::max);
    Ok(GradcheckReport {
        trials: cfg.trials,
        max_relative_error,
        errors,
    })
}
