use std::io;

use thiserror::Error;

use crate::train::TrainDiagnostic;

pub type Result<T, E = FveError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FveError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mixture model: {0}")]
    InvalidModel(String),

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("uninitialized estimator: bias correction needs at least one update (t = 0)")]
    Uninitialized,

    #[error("empty feature group {0}")]
    EmptyGroup(u64),

    #[error("non-finite loss at step {}", .0.step)]
    NonFiniteLoss(Box<TrainDiagnostic>),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FveError {
    /// Stable machine-readable class name, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            FveError::DimensionMismatch { .. } => "dimension_mismatch",
            FveError::InvalidParameter(_) => "invalid_parameter",
            FveError::InvalidModel(_) => "invalid_model",
            FveError::Initialization(_) => "initialization",
            FveError::Uninitialized => "uninitialized",
            FveError::EmptyGroup(_) => "empty_group",
            FveError::NonFiniteLoss(_) => "non_finite_loss",
            FveError::BadMagic { .. } => "bad_magic",
            FveError::UnsupportedVersion(_) => "unsupported_version",
            FveError::Truncated(_) => "truncated",
            FveError::Corrupt(_) => "corrupt",
            FveError::Config(_) => "config",
            FveError::Io(_) => "io",
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(FveError::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
