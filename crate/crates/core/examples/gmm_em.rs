//! Full-batch EM on a ring of ten Gaussians, printing the likelihood curve.
//!
//! cargo run --example gmm_em

use fve::io::{synth_circle, CircleConfig};
use fve::{em_full, InitSpec, InitStrategy};

fn main() -> fve::Result<()> {
    let data = synth_circle(&CircleConfig::default())?;
    let fit = em_full(&data.batch, 10, &InitSpec::new(InitStrategy::KMeansPlusPlus, 0), 200, 1e-8)?;

    println!("initial  {:.5}", fit.trace.initial);
    for (i, ll) in fit.trace.log_likelihood.iter().enumerate().step_by(5) {
        println!("iter {i:>3} {ll:.5}");
    }
    println!(
        "{} iterations, converged: {}, flagged events: {}",
        fit.trace.iterations(),
        fit.trace.converged,
        fit.trace.events.len()
    );
    let (weights, means) = (fit.gmm.weights(), fit.gmm.means());
    for k in 0..fit.gmm.k() {
        println!("component {k}: w={:.3} mean=({:+.3}, {:+.3})", weights[k], means[[k, 0]], means[[k, 1]]);
    }
    Ok(())
}
