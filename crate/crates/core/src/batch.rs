use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{check_dim, FveError, Result};

/// Rows of one group inside a [`FeatureBatch`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupRows {
    pub id: u64,
    pub rows: Vec<usize>,
}

/// An N×D matrix of local feature vectors, each row tagged with the image
/// (group) it belongs to and optionally the part it was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    data: Array2<f64>,
    groups: Vec<u64>,
    part_ids: Option<Vec<u32>>,
}

impl FeatureBatch {
    /// A batch whose rows all belong to group 0.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let n = data.nrows();
        Self::with_groups(data, vec![0; n])
    }

    pub fn with_groups(data: Array2<f64>, groups: Vec<u64>) -> Result<Self> {
        check_dim("feature batch group tags", data.nrows(), groups.len())?;
        if data.ncols() == 0 {
            return Err(FveError::InvalidParameter(
                "feature dimension must be at least 1".into(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FveError::InvalidParameter(
                "feature batch contains non-finite values".into(),
            ));
        }
        Ok(Self {
            data,
            groups,
            part_ids: None,
        })
    }

    pub fn with_part_ids(mut self, part_ids: Vec<u32>) -> Result<Self> {
        check_dim("feature batch part tags", self.data.nrows(), part_ids.len())?;
        self.part_ids = Some(part_ids);
        Ok(self)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        let mut flat = Vec::with_capacity(rows.len() * d);
        for r in rows {
            check_dim("feature row", d, r.len())?;
            flat.extend_from_slice(r);
        }
        let data = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| FveError::InvalidParameter(e.to_string()))?;
        Self::new(data)
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, n: usize) -> ArrayView1<'_, f64> {
        self.data.row(n)
    }

    pub fn groups(&self) -> &[u64] {
        &self.groups
    }

    pub fn part_ids(&self) -> Option<&[u32]> {
        self.part_ids.as_deref()
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Groups in order of first appearance, each with its row indices in
    /// batch order. Groups need not be contiguous.
    pub fn group_rows(&self) -> Vec<GroupRows> {
        let mut slot: HashMap<u64, usize> = HashMap::new();
        let mut out: Vec<GroupRows> = Vec::new();
        for (n, &g) in self.groups.iter().enumerate() {
            let i = *slot.entry(g).or_insert_with(|| {
                out.push(GroupRows { id: g, rows: Vec::new() });
                out.len() - 1
            });
            out[i].rows.push(n);
        }
        out
    }

    /// A new batch holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> FeatureBatch {
        FeatureBatch {
            data: self.data.select(Axis(0), rows),
            groups: rows.iter().map(|&n| self.groups[n]).collect(),
            part_ids: self
                .part_ids
                .as_ref()
                .map(|p| rows.iter().map(|&n| p[n]).collect()),
        }
    }

    /// Rows of one group as a dense matrix.
    pub fn group_matrix(&self, group: &GroupRows) -> Array2<f64> {
        self.data.select(Axis(0), &group.rows)
    }

    /// Stable reorder so that each group's rows are contiguous, groups in
    /// order of first appearance.
    pub fn grouped_contiguous(&self) -> FeatureBatch {
        let order: Vec<usize> = self
            .group_rows()
            .into_iter()
            .flat_map(|g| g.rows)
            .collect();
        self.select(&order)
    }
}
