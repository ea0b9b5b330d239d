//! Encodes a random set and checks the analytic input gradient against
//! central differences.
//!
//! cargo run --example encode_gradcheck

use fve::fve::{gradcheck, random_instance, GradcheckConfig};
use fve::{encode, encode_vjp, normalize_fv};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fve::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (gmm, set) = random_instance(3, 2, 5, &mut rng);

    let fv = encode(&gmm, set.view())?;
    println!("{} values; mu block {:?}", fv.len(), &fv.values()[..6]);
    let normed = normalize_fv(&fv, true, true);
    println!("normalized l2 = {:.6}", normed.values().iter().map(|v| v * v).sum::<f64>().sqrt());

    // Gradient of sum(fv) with respect to every input row.
    let grad = encode_vjp(&gmm, set.view(), &vec![1.0; fv.len()])?;
    println!("d sum(fv) / dx =\n{:.4}", grad.grad);

    for (k, d, n) in [(1, 2, 1), (2, 3, 4), (5, 8, 16)] {
        let r = gradcheck(&GradcheckConfig { k, d, n, trials: 10, ..GradcheckConfig::default() })?;
        println!("K={k} D={d} N={n}: max relative error {:.2e}", r.max_relative_error);
    }
    Ok(())
}
