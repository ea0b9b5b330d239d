//! Local features from per-part convolutional maps.

use ndarray::{Array2, Array4, ArrayView4};

use crate::batch::FeatureBatch;
use crate::error::{FveError, Result};

/// `P × C × H × W` activation maps of one image's parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvMapStack {
    maps: Array4<f64>,
    image_id: u64,
}

impl ConvMapStack {
    pub fn new(maps: Array4<f64>, image_id: u64) -> Result<Self> {
        if maps.shape().contains(&0) {
            return Err(FveError::InvalidParameter(format!(
                "conv map stack needs positive P, C, H, W; got {:?}",
                maps.shape()
            )));
        }
        if maps.iter().any(|v| !v.is_finite()) {
            return Err(FveError::InvalidParameter("conv maps contain non-finite values".into()));
        }
        Ok(Self { maps, image_id })
    }

    pub fn maps(&self) -> ArrayView4<'_, f64> {
        self.maps.view()
    }

    pub fn image_id(&self) -> u64 {
        self.image_id
    }
}

/// One `C`-dimensional row per spatial cell of each part: part-major, then
/// row-major over `H × W`. Rows are grouped by image id and tagged with
/// their part index; the spatial index is the row's position within its part.
pub fn flatten_convmaps(stack: &ConvMapStack) -> FeatureBatch {
    let m = stack.maps();
    let (p, c, h, w) = m.dim();
    let rows = p * h * w;
    let mut data = Array2::<f64>::zeros((rows, c));
    let mut part_ids = Vec::with_capacity(rows);
    let mut r = 0;
    for part in 0..p {
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    data[[r, ch]] = m[[part, ch, y, x]];
                }
                part_ids.push(part as u32);
                r += 1;
            }
        }
    }
    FeatureBatch::with_groups(data, vec![stack.image_id(); rows])
        .and_then(|b| b.with_part_ids(part_ids))
        .expect("validated conv maps flatten into a valid batch")
}

/// Outcome of [`filter_by_norm`], summed over groups.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterReport {
    pub kept: usize,
    pub dropped: usize,
    /// Per-group mean L2 norm, in group order.
    pub thresholds: Vec<f64>,
    /// Set when at least one group kept every row because none exceeded
    /// its mean.
    pub fallback_used: bool,
}

/// Row indices kept by the norm filter, per group in batch order.
pub fn norm_filter_indices(batch: &FeatureBatch) -> (Vec<usize>, FilterReport) {
    let mut report = FilterReport::default();
    let mut kept_rows = Vec::with_capacity(batch.len());
    for group in batch.group_rows() {
        let norms: Vec<f64> = group
            .rows
            .iter()
            .map(|&n| batch.row(n).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        let all_equal = norms.iter().all(|&v| v == norms[0]);
        let kept: Vec<usize> = group
            .rows
            .iter()
            .zip(&norms)
            .filter(|(_, &nrm)| nrm > mean)
            .map(|(&n, _)| n)
            .collect();
        report.thresholds.push(mean);
        if kept.is_empty() || all_equal {
            report.fallback_used = true;
            report.kept += group.rows.len();
            kept_rows.extend_from_slice(&group.rows);
        } else {
            report.kept += kept.len();
            report.dropped += group.rows.len() - kept.len();
            kept_rows.extend(kept);
        }
    }
    kept_rows.sort_unstable();
    (kept_rows, report)
}

/// Keeps, within each group, the rows whose L2 norm is strictly above the
/// group's mean L2 norm. A group where no row qualifies is kept whole.
pub fn filter_by_norm(batch: &FeatureBatch) -> (FeatureBatch, FilterReport) {
    let (rows, report) = norm_filter_indices(batch);
    (batch.select(&rows), report)
}
