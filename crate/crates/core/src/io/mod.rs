//! File formats, synthetic data and small text outputs.

pub mod config;
pub mod csv;
pub mod feature_file;
pub mod gmm_file;
pub mod synth;

pub use feature_file::{read_features, read_features_path, write_features, write_features_path, FEATURE_MAGIC};
pub use gmm_file::{read_gmm, read_gmm_path, write_gmm, write_gmm_path, GmmSnapshot, GMM_MAGIC};
pub use synth::{parts_to_batch, synth_circle, CircleConfig, Difficulty, GroupLabel, LabeledBatch};
pub use config::DemoConfig;

use std::io::Read;

use crate::error::{FveError, Result};

pub(crate) const FORMAT_VERSION: u16 = 1;

pub(crate) fn read_bytes<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => FveError::Truncated(format!("while reading {what}")),
        _ => FveError::Io(e),
    })?;
    Ok(buf)
}

macro_rules! le_reader {
    ($name:ident, $ty:ty) => {
        pub(crate) fn $name<R: Read>(r: &mut R, what: &str) -> Result<$ty> {
            let b = read_bytes(r, std::mem::size_of::<$ty>(), what)?;
            Ok(<$ty>::from_le_bytes(b.try_into().expect("exact length")))
        }
    };
}

le_reader!(read_u16, u16);
le_reader!(read_u32, u32);
le_reader!(read_u64, u64);
le_reader!(read_f64, f64);

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<f64>> {
    let bytes = read_bytes(r, n.checked_mul(8).ok_or_else(|| FveError::Corrupt(format!("{what} too large")))?, what)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub(crate) fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(FveError::Corrupt("trailing bytes after payload".into())),
    }
}

pub(crate) fn check_magic(found: [u8; 4], expected: [u8; 4]) -> Result<()> {
    if found != expected {
        return Err(FveError::BadMagic { expected, found });
    }
    Ok(())
}
