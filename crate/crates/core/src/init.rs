//! Seeded starting points for EM.

use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::batch::FeatureBatch;
use crate::error::{check_dim, FveError, Result};
use crate::gmm::DiagGmm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// Means are `K` distinct rows drawn uniformly at random.
    RandomSubset,
    /// Greedy k-means++ seeding over the distinct rows.
    KMeansPlusPlus,
    /// Lloyd's k-means from several k-means++ seedings; the lowest-inertia
    /// clustering supplies per-cluster weights, means and variances.
    KMeans,
    /// Use [`InitSpec::provided`] verbatim.
    Provided,
}

impl std::str::FromStr for InitStrategy {
    type Err = FveError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-subset" => Ok(Self::RandomSubset),
            "kmeans-plus-plus" | "kmeans++" => Ok(Self::KMeansPlusPlus),
            "kmeans" => Ok(Self::KMeans),
            "provided" => Ok(Self::Provided),
            other => Err(FveError::InvalidParameter(format!("unknown init strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub strategy: InitStrategy,
    pub seed: u64,
    pub provided: Option<DiagGmm>,
}

impl InitSpec {
    pub fn new(strategy: InitStrategy, seed: u64) -> Self {
        Self {
            strategy,
            seed,
            provided: None,
        }
    }

    pub fn provided(gmm: DiagGmm) -> Self {
        Self {
            strategy: InitStrategy::Provided,
            seed: 0,
            provided: Some(gmm),
        }
    }
}

impl Default for InitSpec {
    fn default() -> Self {
        Self::new(InitStrategy::KMeansPlusPlus, 0)
    }
}

/// k-means++ seedings tried by [`InitStrategy::KMeans`].
pub const KMEANS_RESTARTS: usize = 5;
const LLOYD_MAX_ITERS: usize = 100;

/// Builds the starting mixture for `batch`.
///
/// `RandomSubset` and `KMeansPlusPlus` use uniform weights and the batch's
/// per-dimension biased variance (floored) for every component.
pub fn initialize(batch: &FeatureBatch, k: usize, spec: &InitSpec) -> Result<DiagGmm> {
    if k == 0 {
        return Err(FveError::InvalidParameter("K must be at least 1".into()));
    }
    if spec.strategy == InitStrategy::Provided {
        let gmm = spec
            .provided
            .clone()
            .ok_or_else(|| FveError::Initialization("provided strategy without a model".into()))?;
        check_dim("provided model components", k, gmm.k())?;
        check_dim("provided model dimension", batch.dim(), gmm.dim())?;
        return Ok(gmm);
    }

    let distinct = distinct_rows(batch);
    if distinct.len() < k {
        return Err(FveError::Initialization(format!(
            "need {k} distinct rows, batch has {}",
            distinct.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = match spec.strategy {
        InitStrategy::RandomSubset => {
            let mut pool = distinct;
            pool.shuffle(&mut rng);
            pool.truncate(k);
            pool
        }
        InitStrategy::KMeansPlusPlus => kmeans_pp(batch, &distinct, k, &mut rng)?,
        InitStrategy::KMeans => return kmeans(batch, &distinct, k, &mut rng),
        InitStrategy::Provided => unreachable!(),
    };

    let d = batch.dim();
    let mut means = Array2::<f64>::zeros((k, d));
    for (c, &row) in centers.iter().enumerate() {
        means.row_mut(c).assign(&batch.row(row));
    }
    let var = batch_variance(batch);
    let variances = Array2::from_shape_fn((k, d), |(_, j)| var[j]);
    let mut gmm = DiagGmm::from_parts(Array1::from_elem(k, 1.0 / k as f64), means, variances);
    gmm.apply_floor();
    Ok(gmm)
}

/// Biased per-dimension variance of all rows.
pub(crate) fn batch_variance(batch: &FeatureBatch) -> Vec<f64> {
    let data = batch.data();
    let n = data.nrows() as f64;
    (0..data.ncols())
        .map(|j| {
            let col = data.column(j);
            let mean = col.sum() / n;
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
        })
        .collect()
}

/// Index of the first occurrence of each distinct row value.
fn distinct_rows(batch: &FeatureBatch) -> Vec<usize> {
    let mut seen = HashSet::new();
    (0..batch.len())
        .filter(|&n| {
            let key: Vec<u64> = batch
                .row(n)
                .iter()
                .map(|v| if *v == 0.0 { 0u64 } else { v.to_bits() })
                .collect();
            seen.insert(key)
        })
        .collect()
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy k-means++: each round draws `2 + ln K` D²-weighted candidates and
/// keeps the one that lowers the total potential most.
fn kmeans_pp(batch: &FeatureBatch, pool: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let trials = 2 + (k as f64).ln() as usize;
    let first = pool[rng.random_range(0..pool.len())];
    let mut centers = vec![first];
    let mut d2: Vec<f64> = pool.iter().map(|&i| sq_dist(batch.row(i), batch.row(first))).collect();

    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return Err(FveError::Initialization("all remaining rows coincide with chosen centers".into()));
        }
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let mut target = rng.random::<f64>() * total;
            let mut pick = pool.len() - 1;
            for (p, &v) in d2.iter().enumerate() {
                if target < v {
                    pick = p;
                    break;
                }
                target -= v;
            }
            // Rounding can land on a zero-weight slot; step to the last positive one.
            while d2[pick] == 0.0 && pick > 0 {
                pick -= 1;
            }
            let cand = pool[pick];
            let updated: Vec<f64> = pool
                .iter()
                .zip(&d2)
                .map(|(&i, &old)| old.min(sq_dist(batch.row(i), batch.row(cand))))
                .collect();
            let potential: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|(p, _, _)| potential < *p) {
                best = Some((potential, cand, updated));
            }
        }
        let (_, cand, updated) = best.expect("at least two trials per round");
        centers.push(cand);
        d2 = updated;
    }
    Ok(centers)
}

fn nearest(x: ArrayView1<'_, f64>, means: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in means.rows().into_iter().enumerate() {
        let d = sq_dist(x, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd iterations from the given centers; returns means, labels, inertia.
fn lloyd(batch: &FeatureBatch, mut means: Array2<f64>) -> (Array2<f64>, Vec<usize>, f64) {
    let (n, k) = (batch.len(), means.nrows());
    let mut labels = vec![usize::MAX; n];
    for _ in 0..LLOYD_MAX_ITERS {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, _) = nearest(batch.row(i), &means);
            changed |= *label != c;
            *label = c;
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros(means.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &batch.row(i));
            counts[c] += 1;
        }
        for c in 0..k {
            // An emptied cluster keeps its previous center.
            if counts[c] > 0 {
                means.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            }
        }
    }
    let inertia = (0..n).map(|i| nearest(batch.row(i), &means).1).sum();
    let labels = (0..n).map(|i| nearest(batch.row(i), &means).0).collect();
    (means, labels, inertia)
}

fn kmeans(batch: &FeatureBatch, pool: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Result<DiagGmm> {
    let d = batch.dim();
    let mut best: Option<(Array2<f64>, Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let seeds = kmeans_pp(batch, pool, k, rng)?;
        let mut start = Array2::<f64>::zeros((k, d));
        for (c, &row) in seeds.iter().enumerate() {
            start.row_mut(c).assign(&batch.row(row));
        }
        let run = lloyd(batch, start);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (means, labels, _) = best.expect("at least one restart");

    let n = batch.len() as f64;
    let mut counts = vec![0.0; k];
    let mut sq = Array2::<f64>::zeros((k, d));
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1.0;
        for j in 0..d {
            let r = batch.row(i)[j] - means[[c, j]];
            sq[[c, j]] += r * r;
        }
    }
    let pooled: Vec<f64> = (0..d).map(|j| sq.column(j).sum() / n).collect();
    // Singleton and empty clusters borrow the pooled within-cluster variance;
    // every cluster counts at least once so no weight starts at zero.
    let variances = Array2::from_shape_fn((k, d), |(c, j)| {
        if counts[c] >= 2.0 {
            sq[[c, j]] / counts[c]
        } else {
            pooled[j]
        }
    });
    let mut weights = Array1::from_shape_fn(k, |c| counts[c].max(1.0));
    weights /= weights.sum();
    let mut gmm = DiagGmm::from_parts(weights, means, variances);
    gmm.apply_floor();
    Ok(gmm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn batch() -> FeatureBatch {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.37).sin() * 3.0, (i as f64 * 1.3).cos()])
            .collect();
        FeatureBatch::from_rows(&rows).unwrap()
    }

    #[test]
    fn same_seed_same_model() {
        let b = batch();
        for strategy in [InitStrategy::RandomSubset, InitStrategy::KMeansPlusPlus, InitStrategy::KMeans] {
            let spec = InitSpec::new(strategy, 99);
            assert_eq!(initialize(&b, 5, &spec).unwrap(), initialize(&b, 5, &spec).unwrap());
        }
    }

    #[test]
    fn provided_passthrough() {
        let g = DiagGmm::new(array![0.25, 0.75], array![[0.0, 1.0], [2.0, 3.0]], array![[1.0, 1.0], [0.5, 0.5]])
            .unwrap();
        let got = initialize(&batch(), 2, &InitSpec::provided(g.clone())).unwrap();
        assert_eq!(got, g);
    }

    #[test]
    fn too_few_distinct_rows() {
        let b = FeatureBatch::from_rows(&[vec![1.0], vec![1.0], vec![2.0]]).unwrap();
        let err = initialize(&b, 3, &InitSpec::new(InitStrategy::RandomSubset, 0)).unwrap_err();
        assert_eq!(err.kind(), "initialization");
        assert!(initialize(&b, 2, &InitSpec::new(InitStrategy::KMeansPlusPlus, 0)).is_ok());
    }

    #[test]
    fn centers_are_distinct_rows() {
        let b = batch();
        let g = initialize(&b, 8, &InitSpec::new(InitStrategy::KMeansPlusPlus, 5)).unwrap();
        let m = g.means();
        for a in 0..8 {
            for c in a + 1..8 {
                assert_ne!(m.row(a), m.row(c));
            }
        }
        assert!((g.weights().sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kmeans_recovers_separated_clusters() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let c = (i % 3) as f64 * 10.0;
                vec![c + (i as f64 * 0.7).sin() * 0.1, (i as f64 * 1.1).cos() * 0.1]
            })
            .collect();
        let b = FeatureBatch::from_rows(&rows).unwrap();
        let g = initialize(&b, 3, &InitSpec::new(InitStrategy::KMeans, 3)).unwrap();
        let mut xs: Vec<f64> = g.means().column(0).to_vec();
        xs.sort_by(f64::total_cmp);
        for (x, c) in xs.iter().zip([0.0, 10.0, 20.0]) {
            assert!((x - c).abs() < 0.1);
        }
        assert!(g.weights().iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-12));
        assert!(g.variances().iter().all(|&v| v < 0.02));
    }
}
