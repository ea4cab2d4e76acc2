use super::grid::GridField;
use super::indenter::{fk_step, IndenterState};
use super::material::MaterialParams;
use super::particles::ParticleSet;
use super::transfer::{check_cfl, contact_project, g2p, grid_update, p2g};
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::scalar::Real;

pub const DEFAULT_FPS: f64 = 24.0;
pub const DEFAULT_SUBSTEPS: u32 = 100;
pub const DEFAULT_VOXEL_RES: f64 = 1.2;

/// Everything one rollout owns.
#[derive(Clone, Debug)]
pub struct SimState<T> {
    pub particles: ParticleSet<T>,
    pub grid: GridField<T>,
    pub indenter: Option<IndenterState>,
    pub material: MaterialParams<T>,
    pub fps: f64,
    pub substeps_per_frame: u32,
    /// Frames completed so far.
    pub frame: u64,
    pub sticky_base: bool,
}

/// Lattice for a hemispherical gel of `radius` on the z = 0 plane: the gel's
/// bounding box, `padding` mm of room for bulging, and three extra nodes.
pub fn sensor_grid<T: Real>(radius: f64, h: f64, padding: f64) -> Result<GridField<T>> {
    let r = radius + padding;
    GridField::covering(Vec3::new(-r, -r, -padding), Vec3::new(r, r, r), h, 3)
}

impl<T: Real> SimState<T> {
    pub fn new(
        particles: ParticleSet<T>,
        grid: GridField<T>,
        indenter: Option<IndenterState>,
        material: MaterialParams<T>,
        fps: f64,
        substeps_per_frame: u32,
    ) -> Result<Self> {
        let state =
            SimState { particles, grid, indenter, material, fps, substeps_per_frame, frame: 0, sticky_base: true };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0) || self.substeps_per_frame == 0 {
            return Err(Error::InvalidParameter("fps and substeps must be positive".into()));
        }
        self.material.validate()?;
        if let Some(ind) = &self.indenter {
            ind.validate()?;
        }
        if self.particles.is_empty() {
            return Err(Error::Empty("particle set"));
        }
        Ok(())
    }

    pub fn dt_sub(&self) -> f64 {
        1.0 / (self.fps * self.substeps_per_frame as f64)
    }

    /// Simulated time at the start of the next frame, seconds.
    pub fn time(&self) -> f64 {
        self.frame as f64 / self.fps
    }

    /// One substep: FK, P2G, grid update, contact, G2P, CFL check.
    pub fn substep(&mut self, s: u32) -> Result<()> {
        let dt = self.dt_sub();
        let t = self.time() + s as f64 * dt;
        if let Some(ind) = self.indenter.as_mut() {
            fk_step(ind, t, dt);
        }
        p2g(&self.particles, &mut self.grid, &self.material, dt)?;
        grid_update(&mut self.grid, self.material.damping, dt, self.sticky_base);
        if let Some(ind) = &self.indenter {
            contact_project(&mut self.grid, ind);
        }
        g2p(&self.grid, &mut self.particles, dt)?;
        check_cfl(&self.particles, dt, self.grid.h)
    }

    /// Advances one frame (`substeps_per_frame` substeps). Errors carry the
    /// global substep index.
    pub fn step_frame(&mut self) -> Result<()> {
        for s in 0..self.substeps_per_frame {
            self.substep(s).map_err(|e| Error::Substep {
                substep: self.frame * self.substeps_per_frame as u64 + s as u64,
                source: Box::new(e),
            })?;
        }
        self.frame += 1;
        Ok(())
    }
}
