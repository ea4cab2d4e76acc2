//! Residual image model for simulated optical tactile sensors.
//!
//! Rendered normal and depth maps go through a small convolutional
//! encoder–decoder whose output is added to an idle (contact-free) camera
//! frame. Forward and backward passes are implemented here on top of an
//! im2col + GEMM convolution.

pub mod layers;
pub mod net;
pub mod shading;
pub mod tensor;
pub mod train;
pub mod weights;

use std::path::PathBuf;

pub use net::OpticalNet;
pub use shading::{compose, marker_pattern, normalize_inputs, synth_shade};
pub use tensor::{Scalar, Tensor};
pub use train::{train, Sample, TargetMode, TrainConfig};

/// Single-precision model used for training and inference.
pub type OpticalModel = OpticalNet<f32>;
pub type OpticalInput = Tensor<f32>;
pub type ResidualImage = Tensor<f32>;

pub type Result<T, E = OpticalError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum OpticalError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training set is empty")]
    EmptyDataset,

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("bad weights file: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] gelsim_core::Error),
}

impl OpticalError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        OpticalError::Io { path: path.into(), source }
    }
}
