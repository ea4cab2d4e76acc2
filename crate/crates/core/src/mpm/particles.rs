use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

/// Lagrangian gel state, structure-of-arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet<T> {
    /// mm
    pub x: Vec<Vec3<T>>,
    /// mm/s
    pub v: Vec<Vec3<T>>,
    pub f: Vec<Mat3<T>>,
    /// Affine velocity field, 1/s.
    pub c: Vec<Mat3<T>>,
    /// kg
    pub mass: Vec<T>,
    /// Reference volume, mm³.
    pub vol0: Vec<T>,
    /// Set at construction for particles on the gel's outer surface.
    pub surface: Vec<bool>,
}

impl<T: Real> ParticleSet<T> {
    pub fn new(x: Vec<Vec3<T>>, mass: Vec<T>, vol0: Vec<T>, surface: Vec<bool>) -> Result<Self> {
        let n = x.len();
        if mass.len() != n || vol0.len() != n || surface.len() != n {
            return Err(Error::SizeMismatch(n, mass.len().min(vol0.len()).min(surface.len())));
        }
        if let Some(i) = mass.iter().position(|m| !(m.value() > 0.0)) {
            return Err(Error::InvalidParameter(format!("particle {i} has non-positive mass")));
        }
        Ok(ParticleSet {
            v: vec![Vec3::zero(); n],
            f: vec![Mat3::identity(); n],
            c: vec![Mat3::zero(); n],
            x,
            mass,
            vol0,
            surface,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn total_mass(&self) -> T {
        self.mass.iter().copied().sum()
    }

    pub fn total_momentum(&self) -> Vec3<T> {
        let mut p = Vec3::zero();
        for (m, v) in self.mass.iter().zip(&self.v) {
            p += *v * *m;
        }
        p
    }

    pub fn surface_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.surface[i]).collect()
    }

    /// Positions of the surface-flagged particles, in index order.
    pub fn surface_positions(&self) -> Result<Vec<Vec3<T>>> {
        let pts: Vec<Vec3<T>> = self.x.iter().zip(&self.surface).filter(|(_, s)| **s).map(|(x, _)| *x).collect();
        if pts.is_empty() {
            return Err(Error::Empty("surface particle set"));
        }
        Ok(pts)
    }

    /// Converts every field into another scalar type (tangents start at zero).
    pub fn lift<U: Real>(&self) -> ParticleSet<U> {
        ParticleSet {
            x: self.x.iter().map(|p| Vec3::lift(p.value())).collect(),
            v: self.v.iter().map(|p| Vec3::lift(p.value())).collect(),
            f: self.f.iter().map(|m| Mat3::lift(m.value())).collect(),
            c: self.c.iter().map(|m| Mat3::lift(m.value())).collect(),
            mass: self.mass.iter().map(|m| U::lit(m.value())).collect(),
            vol0: self.vol0.iter().map(|m| U::lit(m.value())).collect(),
            surface: self.surface.clone(),
        }
    }

    /// Primal values.
    pub fn value(&self) -> ParticleSet<f64> {
        self.lift()
    }
}

/// Positions of the surface-flagged particles as a plain cloud.
pub fn surface_points<T: Real>(particles: &ParticleSet<T>) -> Result<PointCloud> {
    Ok(PointCloud::new(particles.surface_positions()?.into_iter().map(|p| p.value()).collect()))
}
