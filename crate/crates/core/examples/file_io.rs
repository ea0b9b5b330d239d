//! Writes a feature file and a resumable mixture snapshot, reads both back,
//! and continues streaming from the restored state.
//!
//! cargo run --example file_io

use fve::io::{read_features_path, read_gmm_path, synth_circle, write_features_path, write_gmm_path, CircleConfig, GmmSnapshot};
use fve::streaming::fit_streaming;
use fve::{InitSpec, InitStrategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("fve-file-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let (features, model) = (dir.join("circle.fvef"), dir.join("circle.fveg"));

    let data = synth_circle(&CircleConfig { samples_per_class: 50, ..CircleConfig::default() })?;
    write_features_path(&features, &data.batch)?;
    let fit = fit_streaming(&data.batch, 10, 0.9, 64, 20, &InitSpec::new(InitStrategy::KMeans, 0), 0)?;
    write_gmm_path(&model, &GmmSnapshot::from_state(&fit.state)?)?;
    println!(
        "{}: {} bytes, {}: {} bytes",
        features.display(),
        std::fs::metadata(&features)?.len(),
        model.display(),
        std::fs::metadata(&model)?.len()
    );

    let restored = read_features_path(&features)?;
    let mut state = read_gmm_path(&model)?.to_state(0.9)?;
    // The snapshot keeps the accumulators, so the debiased model is restored exactly.
    assert_eq!(state.accumulators(), fit.state.accumulators());
    assert_eq!(state.bias_corrected()?, fit.state.bias_corrected()?);
    state.step(&restored.select(&(0..64).collect::<Vec<_>>()))?;
    println!("resumed at t={} -> t={}", fit.state.t(), state.t());

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
