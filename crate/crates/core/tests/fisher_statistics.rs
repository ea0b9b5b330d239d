use fve::{encode, DiagGmm};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn sample(gmm: &DiagGmm, n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let d = gmm.dim();
    let mut out = Array2::zeros((n, d));
    for mut row in out.rows_mut() {
        let u: f64 = rng.random();
        let mut c = 0;
        let mut cum = gmm.weights()[0];
        while u > cum && c + 1 < gmm.k() {
            c += 1;
            cum += gmm.weights()[c];
        }
        for j in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            row[j] = gmm.means()[[c, j]] + gmm.variances()[[c, j]].sqrt() * z;
        }
    }
    out
}

/// Under the mixture itself each coordinate of the `1/sqrt(N·w)`-scaled
/// Fisher vector has mean zero and unit-order spread, so the per-sample
/// average `fv / sqrt(N)` shrinks like `1/sqrt(N)`.
#[test]
fn self_sampled_sets_encode_near_zero() {
    let gmm = DiagGmm::new(
        array![0.5, 0.3, 0.2],
        array![[-3.0, 0.0], [2.0, 2.0], [2.5, -3.0]],
        array![[1.0, 0.5], [0.3, 2.0], [1.5, 1.5]],
    )
    .unwrap();
    let n = 100_000;
    let set = sample(&gmm, n, &mut ChaCha8Rng::seed_from_u64(11));
    let fv = encode(&gmm, set.view()).unwrap();
    let root_n = (n as f64).sqrt();
    for (i, v) in fv.values().iter().enumerate() {
        assert!((v / root_n).abs() < 6.0 / root_n, "coordinate {i} = {v:e}");
    }
    let mean_square = fv.values().iter().map(|v| v * v).sum::<f64>() / fv.len() as f64;
    assert!(mean_square < 4.0, "mean square {mean_square}");
}
