//! Network inputs, the synthetic stand-in camera, and image composition.

use crate::tensor::{Scalar, Tensor};
use crate::{OpticalError, Result};
use gelsim_core::camera::TactileGeometryFrame;
use gelsim_core::image::RgbImage;
use gelsim_core::linalg::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Four channels `(nx, ny, nz, depth)` in [0, 1]. Invalid pixels read as a
/// flat surface at `max_depth`.
pub fn normalize_inputs<T: Scalar>(frame: &TactileGeometryFrame) -> Tensor<T> {
    let n = frame.width * frame.height;
    let mut t = Tensor::zeros(4, frame.height, frame.width);
    for k in 0..n {
        let (nrm, d) = if frame.valid[k] {
            (frame.normal[k], (frame.depth[k] / frame.max_depth).clamp(0.0, 1.0))
        } else {
            (Vec3::new(0.0, 0.0, -1.0), 1.0)
        };
        let ch = [nrm.x, nrm.y, nrm.z].map(|c| (0.5 * (c + 1.0)).clamp(0.0, 1.0));
        for (c, v) in ch.into_iter().chain([d]).enumerate() {
            t.data[c * n + k] = T::lit(v);
        }
    }
    t
}

/// Two coloured lights below the gel plus ambient.
pub struct Lighting {
    pub ambient: [f64; 3],
    /// (unit direction towards the light, colour).
    pub lights: [(Vec3<f64>, [f64; 3]); 2],
}

impl Default for Lighting {
    fn default() -> Self {
        Lighting {
            ambient: [0.3, 0.3, 0.3],
            lights: [
                (Vec3::new(0.7, 0.25, -1.0).normalized(), [0.6, 0.3, 0.15]),
                (Vec3::new(-0.45, -0.6, -1.0).normalized(), [0.15, 0.35, 0.6]),
            ],
        }
    }
}

impl Lighting {
    /// Per-channel Lambertian shade factor for a camera-facing normal.
    pub fn shade(&self, n: Vec3<f64>) -> [f64; 3] {
        let mut s = self.ambient;
        for (l, col) in &self.lights {
            let cos = n.dot(*l).max(0.0);
            for k in 0..3 {
                s[k] += col[k] * cos;
            }
        }
        s
    }
}

/// Synthetic "real camera": the pattern texture modulated by Lambertian
/// shading of the rendered normals, clamped to [0, 1].
pub fn synth_shade(frame: &TactileGeometryFrame, pattern: &RgbImage) -> Result<RgbImage> {
    synth_shade_with(frame, pattern, &Lighting::default())
}

pub fn synth_shade_with(frame: &TactileGeometryFrame, pattern: &RgbImage, light: &Lighting) -> Result<RgbImage> {
    if (pattern.width, pattern.height) != (frame.width, frame.height) {
        return Err(OpticalError::Shape(format!(
            "pattern {}x{} vs frame {}x{}",
            pattern.width, pattern.height, frame.width, frame.height
        )));
    }
    let data = frame
        .normal
        .iter()
        .zip(&pattern.data)
        .map(|(n, p)| {
            let s = light.shade(*n);
            [0, 1, 2].map(|k| (p[k] * s[k]).clamp(0.0, 1.0))
        })
        .collect();
    Ok(RgbImage { width: frame.width, height: frame.height, data })
}

/// Gel texture: a smooth colour gradient with a jittered grid of dark dots.
pub fn marker_pattern(width: usize, height: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pitch = (width.min(height) as f64 / 8.0).max(3.0);
    let nx = (width as f64 / pitch).ceil() as usize + 1;
    let ny = (height as f64 / pitch).ceil() as usize + 1;
    let dots: Vec<(f64, f64)> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| {
            let jx: f64 = rng.gen_range(-0.2..0.2);
            let jy: f64 = rng.gen_range(-0.2..0.2);
            ((i as f64 + 0.5 + jx) * pitch, (j as f64 + 0.5 + jy) * pitch)
        })
        .collect();
    let radius = 0.22 * pitch;
    RgbImage::from_fn(width, height, |u, v| {
        let (x, y) = (u as f64 + 0.5, v as f64 + 0.5);
        let fx = x / width as f64;
        let fy = y / height as f64;
        let base = [0.75 + 0.15 * fx, 0.8 - 0.1 * fy, 0.7 + 0.1 * (fx - fy)];
        let near = dots.iter().any(|(cx, cy)| (x - cx).powi(2) + (y - cy).powi(2) < radius * radius);
        if near {
            base.map(|c| 0.25 * c)
        } else {
            base
        }
    })
}

/// `clamp(idle + residual, 0, 1)`.
pub fn compose<T: Scalar>(idle: &RgbImage, residual: &Tensor<T>) -> Result<RgbImage> {
    check_rgb_shape(idle, residual)?;
    let n = idle.width * idle.height;
    let data = idle
        .data
        .iter()
        .enumerate()
        .map(|(k, p)| [0, 1, 2].map(|c| (p[c] + residual.data[c * n + k].value()).clamp(0.0, 1.0)))
        .collect();
    Ok(RgbImage { width: idle.width, height: idle.height, data })
}

/// Interprets a network output directly as an image, clamped to [0, 1].
pub fn tensor_to_image<T: Scalar>(t: &Tensor<T>) -> Result<RgbImage> {
    if t.c != 3 {
        return Err(OpticalError::Shape(format!("expected 3 channels, got {}", t.c)));
    }
    let n = t.h * t.w;
    let data = (0..n).map(|k| [0, 1, 2].map(|c| t.data[c * n + k].value().clamp(0.0, 1.0))).collect();
    Ok(RgbImage { width: t.w, height: t.h, data })
}

pub fn image_to_tensor<T: Scalar>(img: &RgbImage) -> Tensor<T> {
    let n = img.width * img.height;
    let mut t = Tensor::zeros(3, img.height, img.width);
    for (k, p) in img.data.iter().enumerate() {
        for c in 0..3 {
            t.data[c * n + k] = T::lit(p[c]);
        }
    }
    t
}

/// `frame − idle` per channel, in [−1, 1].
pub fn residual_target<T: Scalar>(frame: &RgbImage, idle: &RgbImage) -> Result<Tensor<T>> {
    frame.same_shape(idle).map_err(|e| OpticalError::Shape(e.to_string()))?;
    let mut t = image_to_tensor::<T>(frame);
    let i = image_to_tensor::<T>(idle);
    t.data.iter_mut().zip(&i.data).for_each(|(a, b)| *a -= *b);
    Ok(t)
}

fn check_rgb_shape<T: Scalar>(img: &RgbImage, t: &Tensor<T>) -> Result<()> {
    if t.shape() != (3, img.height, img.width) {
        return Err(OpticalError::Shape(format!(
            "image {}x{} vs residual {}x{}x{}",
            img.width, img.height, t.c, t.h, t.w
        )));
    }
    Ok(())
}
