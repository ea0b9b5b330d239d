//! Desk-scale end-to-end training of the FVE layer and its baselines.

pub mod baseline;
pub mod conventional;
pub mod dataset;
pub mod evaluate;
pub mod experiment;
pub mod linear;
pub mod model;

pub use baseline::{prepare_gap, train_gap, GapInput, GapModel};
pub use conventional::{conventional_pipeline, ConventionalResult};
pub use dataset::{synth_parts, PartImage, PartOrder, PartsConfig, SyntheticPartDataset};
pub use evaluate::{fit_linear, Accuracy};
pub use experiment::{median, run_arm, run_k_pair, Arm, ArmOutcome, KOutcome};
pub use linear::Linear;
pub use model::{
    prepare_images, ForwardPass, ImageInput, StepMetrics, StepReport, ToyModel, TrainConfig, TrainDiagnostic,
    Trainer, Visibility,
};
