//! Flattens per-part conv maps into local features and applies the norm
//! filter.
//!
//! cargo run --example part_filter

use fve::{filter_by_norm, flatten_convmaps, ConvMapStack};
use ndarray::Array4;

fn main() -> fve::Result<()> {
    // Two parts, three channels, a 2x3 grid; part 1 is much brighter.
    let maps = Array4::from_shape_fn((2, 3, 2, 3), |(p, c, y, x)| (1 + p * 4) as f64 * ((c + y * 3 + x) % 5) as f64);
    let batch = flatten_convmaps(&ConvMapStack::new(maps, 42)?);
    println!("{} local features of dimension {}", batch.len(), batch.dim());

    let (kept, report) = filter_by_norm(&batch);
    println!(
        "kept {} / dropped {} (threshold {:.3}, fallback {})",
        report.kept, report.dropped, report.thresholds[0], report.fallback_used
    );
    println!("surviving part ids: {:?}", kept.part_ids().unwrap());
    Ok(())
}
