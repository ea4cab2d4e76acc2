//! Differentiable simulation of a hemispherical optical tactile sensor gel.
//!
//! - [`mpm`]: explicit MLS-MPM solver with rigid indenter contact, generic over
//!   the scalar so the same rollout runs on `f64` or on [`Dual2`] tangents.
//! - [`calib`]: gradient-descent identification of (E, ν) against target clouds.
//! - [`camera`]: fisheye ray caster producing depth / normal maps.
//! - [`metrics`]: point-cloud and image error metrics.
//! - [`geometry`]: meshes, clouds, SDFs, trajectories and their file formats.

pub mod calib;
pub mod camera;
pub mod error;
pub mod geometry;
pub mod image;
pub mod linalg;
pub mod metrics;
pub mod mpm;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Dual, Real};

/// Two tangent channels: ∂/∂log E and ∂/∂ν.
pub type Dual2 = Dual<f64, 2>;

pub type Vec3d = linalg::Vec3<f64>;
pub type Mat3d = linalg::Mat3<f64>;

pub type Particles = mpm::ParticleSet<f64>;
pub type DiffParticles = mpm::ParticleSet<Dual2>;
pub type Simulation = mpm::SimState<f64>;
pub type DiffSimulation = mpm::SimState<Dual2>;
pub type Material = mpm::MaterialParams<f64>;
