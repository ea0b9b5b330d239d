//! Trains the toy FVE pipeline and the pooled baseline on synthetic
//! part-annotated images, with parts in canonical and shuffled order.
//!
//! cargo run --release --example joint_demo

use fve::train::{run_arm, synth_parts, Arm, PartsConfig, TrainConfig};

fn main() -> fve::Result<()> {
    let train = TrainConfig::default();
    let ds = synth_parts(&PartsConfig::default())?;
    println!("{} train / {} test images", ds.train.len(), ds.test.len());

    for arm in Arm::ALL {
        let mut last = None;
        let out = run_arm(&ds, arm, &train, |m| last = Some((m.step, m.gmm_log_likelihood)))?;
        let losses = &out.epoch_losses;
        print!("{:<17} test accuracy {:.3}  loss {:.3} -> {:.3}", arm.name(), out.test_accuracy, losses[0], losses[losses.len() - 1]);
        match last {
            Some((step, ll)) => println!("  mixture ll {ll:.3} after {step} steps"),
            None => println!(),
        }
    }
    Ok(())
}
