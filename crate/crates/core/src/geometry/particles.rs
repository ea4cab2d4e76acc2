use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::mpm::{ParticleSet, DENSITY_TO_INTERNAL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Discretization of a hemispherical gel resting on z = 0, centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HemisphereFill {
    /// mm
    pub radius: f64,
    /// Shell thickness in mm; `None` fills the solid hemisphere.
    pub shell: Option<f64>,
    /// mm
    pub voxel_res: f64,
    /// kg/m³
    pub density: f64,
    pub seed: u64,
    /// Particles within this depth (mm) of the outer sphere are flagged as surface.
    pub surface_layer: f64,
}

impl HemisphereFill {
    pub fn new(radius: f64, voxel_res: f64, density: f64) -> Self {
        HemisphereFill {
            radius,
            shell: None,
            voxel_res,
            density,
            seed: 0x5eed,
            // Thinner than half a voxel so the flagged layer renders within
            // half a voxel of the true sphere.
            surface_layer: 0.4 * voxel_res,
        }
    }
}

/// Seeds 8 particles per voxel (2×2×2 sub-cells, each jittered by up to an
/// eighth of a voxel) and keeps those inside the hemisphere (or shell).
pub fn fill_hemisphere_particles(cfg: &HemisphereFill) -> Result<ParticleSet<f64>> {
    let HemisphereFill { radius, shell, voxel_res: h, density, seed, surface_layer } = *cfg;
    if !(radius > 0.0 && h > 0.0 && density > 0.0) {
        return Err(Error::InvalidParameter("radius, voxel_res and density must be > 0".into()));
    }
    if let Some(s) = shell {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter("shell thickness must be > 0".into()));
        }
    }
    if !(surface_layer > 0.0 && surface_layer <= h) {
        return Err(Error::InvalidParameter("surface layer must be in (0, voxel_res]".into()));
    }
    let inner = shell.map(|s| (radius - s).max(0.0)).unwrap_or(0.0);
    let n_xy = (radius / h).ceil() as i64;
    let n_z = (radius / h).ceil() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sub = 0.5 * h;
    let jitter = 0.125 * h;
    let mut x = Vec::new();
    let mut surface = Vec::new();
    for k in 0..n_z {
        for j in -n_xy..n_xy {
            for i in -n_xy..n_xy {
                let corner = Vec3::new(i as f64, j as f64, k as f64) * h;
                for s in 0..8 {
                    let offs = Vec3::new((s & 1) as f64, ((s >> 1) & 1) as f64, ((s >> 2) & 1) as f64);
                    let jit = Vec3::new(
                        rng.gen_range(-jitter..jitter),
                        rng.gen_range(-jitter..jitter),
                        rng.gen_range(-jitter..jitter),
                    );
                    let p = corner + (offs + Vec3::splat(0.5)) * sub + jit;
                    let r = p.norm();
                    if p.z >= 0.0 && r <= radius && r >= inner {
                        x.push(p);
                        surface.push(r >= radius - surface_layer);
                    }
                }
            }
        }
    }
    if x.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "hemisphere of radius {radius} mm at voxel {h} mm produced no particles"
        )));
    }
    let n = x.len();
    let vol = h * h * h / 8.0;
    let mass = density * DENSITY_TO_INTERNAL * vol;
    ParticleSet::new(x, vec![mass; n], vec![vol; n], surface)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn count_tracks_hemisphere_volume() {
        let cfg = HemisphereFill::new(15.0, 1.2, 1000.0);
        let p = fill_hemisphere_particles(&cfg).unwrap();
        let expect = 8.0 * (2.0 / 3.0 * PI * 15f64.powi(3)) / 1.2f64.powi(3);
        let rel = (p.len() as f64 - expect).abs() / expect;
        assert!(rel < 0.03, "{} vs {expect}", p.len());
        for x in &p.x {
            assert!(x.z >= 0.0 && x.norm() <= 15.0 + 1e-9);
        }
        let total: f64 = p.mass.iter().sum();
        let construction = 1000.0 * 1e-9 * (1.2f64.powi(3) / 8.0) * p.len() as f64;
        assert!((total - construction).abs() / construction < 1e-12);
        assert!(p.f.iter().all(|f| *f == crate::linalg::Mat3::identity()));
        assert!(p.v.iter().all(|v| *v == Vec3::zero()));
    }

    #[test]
    fn surface_flags_lie_in_outer_layer() {
        let cfg = HemisphereFill::new(8.0, 1.0, 1000.0);
        let p = fill_hemisphere_particles(&cfg).unwrap();
        let s = p.surface_indices();
        assert!(!s.is_empty());
        for i in s {
            let r = p.x[i].norm();
            assert!((8.0 - 1.0..=8.0).contains(&r));
        }
    }

    #[test]
    fn shell_and_degenerate_inputs() {
        let mut cfg = HemisphereFill::new(6.0, 0.8, 1000.0);
        cfg.shell = Some(2.0);
        let p = fill_hemisphere_particles(&cfg).unwrap();
        assert!(p.x.iter().all(|x| x.norm() >= 4.0 - 1e-12));
        assert!(fill_hemisphere_particles(&HemisphereFill::new(0.01, 1.2, 1000.0)).is_err());
    }

    #[test]
    fn fill_is_deterministic() {
        let cfg = HemisphereFill::new(5.0, 1.0, 1000.0);
        assert_eq!(fill_hemisphere_particles(&cfg).unwrap(), fill_hemisphere_particles(&cfg).unwrap());
    }
}
