//! Explicit MLS-MPM gel solver with a kinematic rigid indenter.
//!
//! Units: lengths in mm, time in s, mass in kg. Stresses are carried
//! internally in kg/(mm·s²) (= 1e-3 Pa); material inputs are given in Pa and
//! kg/m³ and converted at the boundary.
//!
//! A substep is FK → P2G → grid update → contact → G2P. Transfers use
//! quadratic B-splines with APIC affine momentum; the constitutive law is
//! fixed-corotated hyperelasticity.

mod dump;
mod grid;
mod indenter;
mod material;
mod particles;
mod state;
mod transfer;

pub use dump::{read_particles, write_particles};
pub use grid::{GridField, Stencil};
pub use indenter::{fk_step, IndenterState, DEFAULT_FRICTION, DEFAULT_SOFTNESS};
pub use material::{
    first_piola_stress, lame_from_e_nu, MaterialDefaults, MaterialParams, DEFAULT_MATERIAL, DENSITY_TO_INTERNAL,
    PA_TO_INTERNAL,
};
pub use particles::{surface_points, ParticleSet};
pub use state::{sensor_grid, SimState, DEFAULT_FPS, DEFAULT_SUBSTEPS, DEFAULT_VOXEL_RES};
pub use transfer::{check_cfl, contact_project, g2p, grid_update, p2g, project_velocity, ContactResult};
