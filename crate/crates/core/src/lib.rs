//! A Fisher vector encoding (FVE) layer whose mixture parameters are
//! estimated by mini-batch EM instead of gradient descent, with an exact
//! analytic backward pass to the input features.
//!
//! * [`gmm`]: diagonal Gaussian mixtures, soft assignment, full-batch EM.
//! * [`streaming`]: one E/M step per mini-batch, debiased EMA tracking.
//! * [`fve`]: the `2·K·D` encoding, its vector-Jacobian product and a
//!   finite-difference oracle.
//! * [`parts`]: local features from per-part conv maps and the norm filter.
//! * [`train`]: a toy end-to-end pipeline and its baselines.
//! * [`io`]: binary feature / mixture files, synthetic data, CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod bench;
pub mod cli;
pub mod error;
pub mod exec;
pub mod fve;
pub mod gmm;
pub mod init;
pub mod io;
pub mod parts;
pub mod streaming;
pub mod train;

pub use batch::{FeatureBatch, GroupRows};
pub use error::{FveError, Result};
pub use exec::{reduction, set_reduction, Reduction};
pub use fve::{encode, encode_groups, encode_vjp, jacobian_fd, normalize_fv, FisherVector, InputGradient};
pub use gmm::{
    em_full, log_component_density, mean_log_likelihood, soft_assign, DiagGmm, EmFit, EmTrace, Responsibilities,
    COUNT_EPS, VAR_FLOOR,
};
pub use init::{InitSpec, InitStrategy};
pub use parts::{filter_by_norm, flatten_convmaps, ConvMapStack, FilterReport};
pub use streaming::{
    batch_estimates, bias_corrected, ema_update, init_streaming, streaming_step, BatchEstimates, EmaState,
    DEFAULT_LAMBDA,
};
