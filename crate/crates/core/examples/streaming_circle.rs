//! Mini-batch EM against full-batch EM on the same ring data.
//!
//! cargo run --example streaming_circle

use fve::io::{synth_circle, CircleConfig};
use fve::streaming::fit_streaming;
use fve::{em_full, InitSpec, InitStrategy};

fn main() -> fve::Result<()> {
    let data = synth_circle(&CircleConfig::default())?;
    let init = InitSpec::new(InitStrategy::KMeans, 0);
    let reference = em_full(&data.batch, 10, &init, 500, 1e-10)?.trace.last();

    for lambda in [0.5, 0.9, 0.99] {
        let fit = fit_streaming(&data.batch, 10, lambda, 128, 200, &init, 0)?;
        let at = |s: usize| fit.trace[s - 1];
        println!(
            "lambda {lambda:<4}: step 10 {:.4}  step 50 {:.4}  step 200 {:.4}  (full batch {reference:.4})",
            at(10),
            at(50),
            at(200)
        );
    }
    Ok(())
}
