//! Times the mixture update, the encoding and the classifier head of one
//! forward pass.
//!
//! cargo run --release --example overhead

use fve::bench::bench_forward;
use fve::init::initialize;
use fve::{EmaState, FeatureBatch, InitSpec, InitStrategy};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> fve::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (k, d) in [(5, 16), (10, 32), (32, 64)] {
        let (groups, per) = (64, 48);
        let rows = Array2::from_shape_fn((groups * per, d), |_| StandardNormal.sample(&mut rng));
        let batch = FeatureBatch::with_groups(rows, (0..groups * per).map(|i| (i / per) as u64).collect())?;
        let gmm = initialize(&batch, k, &InitSpec::new(InitStrategy::KMeansPlusPlus, 0))?;
        let r = bench_forward(&EmaState::new(gmm, 0.9)?, &batch, 10, 10)?;
        println!(
            "K={k:<2} D={d:<2}: {:.2} ms per pass, EM update {:.0}%, encode {:.0}%",
            r.total_s * 1e3,
            100.0 * r.em_update_fraction,
            100.0 * r.encode_fraction
        );
    }
    Ok(())
}
