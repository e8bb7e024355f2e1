//! Pose-driven neural video rendering with learnable multi-part hybrid textures.

pub mod background;
pub mod checkpoint;
pub mod dataset;
pub mod d2g;
pub mod error;
pub mod evaluate;
mod fill;
pub mod io;
pub mod losses;
pub mod mapping;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pose;
pub mod pretrain;
pub mod scene;
pub mod skeleton;
pub mod split;
pub mod texture;
pub mod train;
pub mod uvgen;
pub mod warp;

pub use error::{Error, Result};

/// RGB image, `1 x 3 x H x W`, values in `[0, 1]`.
pub type Image = hytex_tensor::Tensor<f32>;
