pub mod calibrate;
pub mod evaluate;
pub mod generate;
pub mod render;
pub mod simulate;
pub mod train;

use crate::error::CliError;
use gelsim_core::camera::TactileGeometryFrame;
use gelsim_core::image::RgbImage;
use gelsim_optical::{normalize_inputs, OpticalModel, TargetMode};

/// Camera image predicted by the optical model from rendered maps.
pub fn predict_image(
    net: &OpticalModel,
    mode: TargetMode,
    maps: &TactileGeometryFrame,
    idle: &RgbImage,
) -> Result<RgbImage, CliError> {
    let out = net.forward(&normalize_inputs(maps))?;
    Ok(mode.image(&out, idle)?)
}
