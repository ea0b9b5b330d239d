//! Relative cost of the layer's pieces inside one forward pass.

use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::batch::FeatureBatch;
use crate::error::{FveError, Result};
use crate::fve::encode;
use crate::streaming::EmaState;
use crate::train::Linear;

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub iterations: usize,
    pub rows: usize,
    pub groups: usize,
    /// Median seconds per forward pass.
    pub total_s: f64,
    pub em_update_s: f64,
    pub encode_s: f64,
    pub head_s: f64,
    pub em_update_fraction: f64,
    pub encode_fraction: f64,
}

fn median(mut v: Vec<Duration>) -> f64 {
    v.sort();
    v[v.len() / 2].as_secs_f64()
}

/// Times `iterations` forward passes of: one streaming EM update on all of
/// `batch`, encoding every group with the updated model, and a linear head
/// with `classes` outputs over the encodings. The state is reset before
/// every pass so each one does identical work.
pub fn bench_forward(state: &EmaState, batch: &FeatureBatch, classes: usize, iterations: usize) -> Result<BenchReport> {
    if iterations == 0 || classes == 0 {
        return Err(FveError::InvalidParameter("iterations and classes must be positive".into()));
    }
    let groups = batch.group_rows();
    let matrices: Vec<Array2<f64>> = groups.iter().map(|g| batch.group_matrix(g)).collect();
    let width = 2 * state.k() * state.dim();
    let head = Linear::random(width, classes, 1.0, &mut ChaCha8Rng::seed_from_u64(0));

    let (mut em, mut enc, mut hd, mut tot) = (vec![], vec![], vec![], vec![]);
    for _ in 0..iterations {
        let mut s = state.clone();
        let start = Instant::now();
        s.step(batch)?;
        let gmm = s.bias_corrected()?;
        let t_em = start.elapsed();

        let t0 = Instant::now();
        let mut fvs = Array2::zeros((matrices.len(), width));
        for (i, m) in matrices.iter().enumerate() {
            let fv = encode(&gmm, m.view())?;
            fvs.row_mut(i).assign(&ndarray::ArrayView1::from(fv.values()));
        }
        let t_enc = t0.elapsed();

        let t1 = Instant::now();
        std::hint::black_box(head.forward(fvs.view()));
        let t_head = t1.elapsed();

        em.push(t_em);
        enc.push(t_enc);
        hd.push(t_head);
        tot.push(start.elapsed());
    }
    let (total_s, em_update_s, encode_s, head_s) = (median(tot), median(em), median(enc), median(hd));
    Ok(BenchReport {
        iterations,
        rows: batch.len(),
        groups: groups.len(),
        total_s,
        em_update_s,
        encode_s,
        head_s,
        em_update_fraction: em_update_s / total_s,
        encode_fraction: encode_s / total_s,
    })
}
