//! Small text outputs. Floats use Rust's shortest round-trip formatting, so
//! identical values always print identically.

use std::io::Write;

use super::synth::GroupLabel;
use crate::error::Result;
use crate::fve::FisherVector;

pub fn write_circle_labels<W: Write>(w: &mut W, labels: &[usize]) -> Result<()> {
    writeln!(w, "row,label")?;
    for (i, l) in labels.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    Ok(())
}

pub fn write_group_labels<W: Write>(w: &mut W, labels: &[GroupLabel]) -> Result<()> {
    writeln!(w, "group,label,split")?;
    for l in labels {
        writeln!(w, "{},{},{}", l.group, l.label, if l.train { "train" } else { "test" })?;
    }
    Ok(())
}

pub fn write_trace<W: Write>(w: &mut W, trace: &[f64]) -> Result<()> {
    writeln!(w, "step,mean_log_likelihood")?;
    for (i, v) in trace.iter().enumerate() {
        writeln!(w, "{},{v}", i + 1)?;
    }
    Ok(())
}

/// Header of `mu_k{k}_d{d}` then `sigma_k{k}_d{d}` names, then one row per
/// Fisher vector.
pub fn write_fisher_vectors<W: Write>(w: &mut W, k: usize, d: usize, rows: &[FisherVector]) -> Result<()> {
    writeln!(w, "{}", FisherVector::column_names(k, d).join(","))?;
    for fv in rows {
        let line: Vec<String> = fv.values().iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
