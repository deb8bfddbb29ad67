//! Dataset generation and IO, augmentation, training, ablation drivers and
//! image output.

pub mod ablation;
pub mod augment;
pub mod config;
pub mod dataset;
pub mod pgm;
pub mod train;

pub use ablation::{arm_config, run_ablation, AblationArm, AblationReport};
pub use augment::{apply_time_masks, time_mask_augment};
pub use config::{AblationConfig, DatasetConfig, MaskConfig, RunConfig, TrainConfig};
pub use dataset::{generate_dataset, normalize_input, Dataset, GenSpec, Manifest, SampleRecord};
pub use pgm::{render_pgm, GrayImage};
pub use train::{load_model, save_model, train, StepLog, TrainOutcome, ValLog};

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed data: {0}")]
    Format(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("non-finite loss at step {step}; diagnostics in {dump}")]
    NonFiniteLoss { step: u64, dump: String },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error(transparent)]
    Acoustics(#[from] crate::acoustics::AcousticsError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Objective(#[from] crate::objective::ObjectiveError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }
}
