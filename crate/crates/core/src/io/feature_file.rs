//! Binary feature files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        4 bytes  "FVEF"
//! version      u16      1
//! rows         u64      N
//! dim          u32      D
//! groups       u64      G
//! flags        u32      bit 0: part ids present
//! G × { id u64, row offset u64, row count u32 }
//! N × D f64    row-major payload
//! N × u32      part ids, only when flag bit 0 is set
//! ```
//!
//! Each group's rows are contiguous; offsets start at 0, increase strictly
//! and tile `0..N` exactly.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{check_magic, expect_eof, read_bytes, read_f64s, read_u16, read_u32, read_u64, FORMAT_VERSION};
use crate::batch::FeatureBatch;
use crate::error::{FveError, Result};

pub const FEATURE_MAGIC: [u8; 4] = *b"FVEF";
const FLAG_PART_IDS: u32 = 1;

/// Writes `batch`, reordering rows so each group is contiguous (groups in
/// order of first appearance, rows in batch order within a group).
pub fn write_features<W: Write>(w: &mut W, batch: &FeatureBatch) -> Result<()> {
    let batch = batch.grouped_contiguous();
    let groups = batch.group_rows();
    let flags = if batch.part_ids().is_some() { FLAG_PART_IDS } else { 0 };

    w.write_all(&FEATURE_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(batch.len() as u64).to_le_bytes())?;
    w.write_all(&(batch.dim() as u32).to_le_bytes())?;
    w.write_all(&(groups.len() as u64).to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    for g in &groups {
        let count = u32::try_from(g.rows.len())
            .map_err(|_| FveError::InvalidParameter(format!("group {} exceeds u32 rows", g.id)))?;
        w.write_all(&g.id.to_le_bytes())?;
        w.write_all(&(g.rows[0] as u64).to_le_bytes())?;
        w.write_all(&count.to_le_bytes())?;
    }
    for v in batch.data().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some(parts) = batch.part_ids() {
        for p in parts {
            w.write_all(&p.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_features<R: Read>(r: &mut R) -> Result<FeatureBatch> {
    let magic: [u8; 4] = read_bytes(r, 4, "magic")?.try_into().expect("4 bytes");
    check_magic(magic, FEATURE_MAGIC)?;
    let version = read_u16(r, "version")?;
    if version != FORMAT_VERSION {
        return Err(FveError::UnsupportedVersion(version));
    }
    let n = read_u64(r, "row count")? as usize;
    let d = read_u32(r, "dimension")? as usize;
    let g = read_u64(r, "group count")? as usize;
    let flags = read_u32(r, "flags")?;
    if flags & !FLAG_PART_IDS != 0 {
        return Err(FveError::Corrupt(format!("unknown flag bits {flags:#x}")));
    }
    if d == 0 {
        return Err(FveError::Corrupt("dimension is zero".into()));
    }
    if g > n {
        return Err(FveError::Corrupt(format!("{g} groups for {n} rows")));
    }

    let mut groups = Vec::with_capacity(n);
    let mut seen = HashSet::with_capacity(g);
    let mut next = 0u64;
    for _ in 0..g {
        let id = read_u64(r, "group id")?;
        let offset = read_u64(r, "group offset")?;
        let count = read_u32(r, "group row count")? as u64;
        if offset != next || count == 0 {
            return Err(FveError::Corrupt(format!(
                "group {id} covers rows {offset}..{} but the next free row is {next}",
                offset + count
            )));
        }
        if !seen.insert(id) {
            return Err(FveError::Corrupt(format!("duplicate group id {id}")));
        }
        next += count;
        if next > n as u64 {
            return Err(FveError::Corrupt(format!("group {id} runs past row {n}")));
        }
        groups.extend(std::iter::repeat_n(id, count as usize));
    }
    if next != n as u64 {
        return Err(FveError::Corrupt(format!("groups cover {next} of {n} rows")));
    }

    let values = read_f64s(r, n * d, "payload")?;
    let data = Array2::from_shape_vec((n, d), values).map_err(|e| FveError::Corrupt(e.to_string()))?;
    let mut batch = FeatureBatch::with_groups(data, groups).map_err(|e| FveError::Corrupt(e.to_string()))?;
    if flags & FLAG_PART_IDS != 0 {
        let bytes = read_bytes(r, n * 4, "part ids")?;
        let parts = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        batch = batch.with_part_ids(parts)?;
    }
    expect_eof(r)?;
    Ok(batch)
}

pub fn write_features_path(path: &Path, batch: &FeatureBatch) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_features(&mut w, batch)?;
    w.flush()?;
    Ok(())
}

pub fn read_features_path(path: &Path) -> Result<FeatureBatch> {
    read_features(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> FeatureBatch {
        FeatureBatch::with_groups(array![[1.0, -2.5], [0.0, 3.25], [f64::MIN_POSITIVE, 7.0]], vec![4, 9, 4])
            .unwrap()
            .with_part_ids(vec![0, 1, 2])
            .unwrap()
    }

    fn bytes(batch: &FeatureBatch) -> Vec<u8> {
        let mut buf = Vec::new();
        write_features(&mut buf, batch).unwrap();
        buf
    }

    #[test]
    fn roundtrip_groups_become_contiguous() {
        let back = read_features(&mut bytes(&sample()).as_slice()).unwrap();
        assert_eq!(back, sample().grouped_contiguous());
        assert_eq!(back.groups(), &[4, 4, 9]);
        assert_eq!(back.part_ids().unwrap(), &[0, 2, 1]);
    }

    #[test]
    fn header_layout() {
        let b = bytes(&sample());
        assert_eq!(&b[..4], b"FVEF");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(b.len(), 30 + 2 * 20 + 3 * 2 * 8 + 3 * 4);
    }

    #[test]
    fn distinct_error_classes() {
        let good = bytes(&sample());

        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(read_features(&mut bad.as_slice()).unwrap_err().kind(), "bad_magic");

        let mut bad = good.clone();
        bad[4] = 7;
        assert_eq!(read_features(&mut bad.as_slice()).unwrap_err().kind(), "unsupported_version");

        let cut = &good[..good.len() - 5];
        assert_eq!(read_features(&mut &cut[..]).unwrap_err().kind(), "truncated");

        let mut bad = good.clone();
        // Second group's offset.
        bad[30 + 20 + 8] = 0;
        assert_eq!(read_features(&mut bad.as_slice()).unwrap_err().kind(), "corrupt");

        let mut bad = good;
        bad.push(0);
        assert_eq!(read_features(&mut bad.as_slice()).unwrap_err().kind(), "corrupt");
    }
}
