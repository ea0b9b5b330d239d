//! Binary mixture snapshots.
//!
//! ```text
//! magic      4 bytes  "FVEG"
//! version    u16      1
//! K          u32
//! D          u32
//! lambda     f64      0 for models not produced by streaming EM
//! t          u64      streaming step count
//! weights    K f64
//! means      K × D f64
//! variances  K × D f64
//! when t > 0: raw accumulators, same three shapes
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{check_magic, expect_eof, read_bytes, read_f64, read_f64s, read_u16, read_u32, read_u64, FORMAT_VERSION};
use crate::error::{FveError, Result};
use crate::gmm::{DiagGmm, VAR_FLOOR};
use crate::streaming::{Accumulators, EmaState};

pub const GMM_MAGIC: [u8; 4] = *b"FVEG";

#[derive(Debug, Clone, PartialEq)]
pub struct GmmSnapshot {
    pub gmm: DiagGmm,
    pub lambda: f64,
    pub t: u64,
    pub accumulators: Option<Accumulators>,
}

impl GmmSnapshot {
    /// A standalone model, e.g. from full-batch EM.
    pub fn from_gmm(gmm: DiagGmm) -> Self {
        Self {
            gmm,
            lambda: 0.0,
            t: 0,
            accumulators: None,
        }
    }

    /// The model a streaming state currently exposes, with its raw
    /// accumulators once at least one update has happened.
    pub fn from_state(state: &EmaState) -> Result<Self> {
        Ok(Self {
            gmm: state.current()?,
            lambda: state.lambda(),
            t: state.t(),
            accumulators: (state.t() > 0).then(|| state.accumulators()),
        })
    }

    /// Rebuilds a streaming state that continues where the snapshot left off.
    pub fn to_state(&self, default_lambda: f64) -> Result<EmaState> {
        let lambda = if self.lambda > 0.0 { self.lambda } else { default_lambda };
        match &self.accumulators {
            Some(acc) => EmaState::from_accumulators(self.gmm.clone(), lambda, self.t, acc.clone()),
            None => EmaState::new(self.gmm.clone(), lambda),
        }
    }
}

fn write_f64s<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_gmm<W: Write>(w: &mut W, snap: &GmmSnapshot) -> Result<()> {
    if snap.t > 0 && snap.accumulators.is_none() {
        return Err(FveError::InvalidParameter("snapshot with t > 0 needs accumulators".into()));
    }
    let g = &snap.gmm;
    w.write_all(&GMM_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(g.k() as u32).to_le_bytes())?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&snap.lambda.to_le_bytes())?;
    w.write_all(&snap.t.to_le_bytes())?;
    write_f64s(w, g.weights().iter().copied())?;
    write_f64s(w, g.means().iter().copied())?;
    write_f64s(w, g.variances().iter().copied())?;
    if snap.t > 0 {
        let acc = snap.accumulators.as_ref().expect("checked above");
        write_f64s(w, acc.weights.iter().copied())?;
        write_f64s(w, acc.means.iter().copied())?;
        write_f64s(w, acc.variances.iter().copied())?;
    }
    Ok(())
}

fn read_block<R: Read>(r: &mut R, k: usize, d: usize, what: &str) -> Result<(Array1<f64>, Array2<f64>, Array2<f64>)> {
    let weights = Array1::from(read_f64s(r, k, what)?);
    let means = Array2::from_shape_vec((k, d), read_f64s(r, k * d, what)?).map_err(|e| FveError::Corrupt(e.to_string()))?;
    let variances = Array2::from_shape_vec((k, d), read_f64s(r, k * d, what)?).map_err(|e| FveError::Corrupt(e.to_string()))?;
    Ok((weights, means, variances))
}

pub fn read_gmm<R: Read>(r: &mut R) -> Result<GmmSnapshot> {
    let magic: [u8; 4] = read_bytes(r, 4, "magic")?.try_into().expect("4 bytes");
    check_magic(magic, GMM_MAGIC)?;
    let version = read_u16(r, "version")?;
    if version != FORMAT_VERSION {
        return Err(FveError::UnsupportedVersion(version));
    }
    let k = read_u32(r, "K")? as usize;
    let d = read_u32(r, "D")? as usize;
    let lambda = read_f64(r, "lambda")?;
    let t = read_u64(r, "t")?;
    if k == 0 || d == 0 {
        return Err(FveError::Corrupt(format!("K = {k}, D = {d}")));
    }
    if !(0.0..1.0).contains(&lambda) || (t > 0 && lambda == 0.0) {
        return Err(FveError::Corrupt(format!("lambda {lambda} with t = {t}")));
    }

    let (weights, means, variances) = read_block(r, k, d, "mixture")?;
    if variances.iter().any(|&v| !(v >= VAR_FLOOR)) {
        return Err(FveError::Corrupt("variance below the floor".into()));
    }
    // Validate against every mixture invariant, but keep the stored bits.
    DiagGmm::new(weights.clone(), means.clone(), variances.clone()).map_err(|e| FveError::Corrupt(e.to_string()))?;
    let gmm = DiagGmm::from_parts(weights, means, variances);

    let accumulators = if t > 0 {
        let (weights, means, variances) = read_block(r, k, d, "accumulators")?;
        if weights.iter().chain(means.iter()).chain(variances.iter()).any(|v| !v.is_finite()) {
            return Err(FveError::Corrupt("non-finite accumulator".into()));
        }
        Some(Accumulators { weights, means, variances })
    } else {
        None
    };
    expect_eof(r)?;
    Ok(GmmSnapshot { gmm, lambda, t, accumulators })
}

pub fn write_gmm_path(path: &Path, snap: &GmmSnapshot) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_gmm(&mut w, snap)?;
    w.flush()?;
    Ok(())
}

pub fn read_gmm_path(path: &Path) -> Result<GmmSnapshot> {
    read_gmm(&mut BufReader::new(File::open(path)?))
}
