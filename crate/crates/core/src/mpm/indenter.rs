use crate::error::{Error, Result};
use crate::geometry::{sdf_query, IndenterShape, SdfSample, Trajectory};
use crate::linalg::{Pose, Vec3};

pub const DEFAULT_SOFTNESS: f64 = 15.0;
pub const DEFAULT_FRICTION: f64 = 0.3;

/// Kinematically driven rigid indenter.
#[derive(Clone, Debug, PartialEq)]
pub struct IndenterState {
    pub shape: IndenterShape,
    pub pose: Pose,
    /// mm/s
    pub lin_vel: Vec3<f64>,
    /// rad/s
    pub ang_vel: Vec3<f64>,
    pub trajectory: Trajectory,
    pub friction: f64,
    /// Grid nodes closer than `h / softness` to the surface count as touching.
    pub softness: f64,
}

impl IndenterState {
    pub fn new(shape: IndenterShape, trajectory: Trajectory) -> Result<Self> {
        shape.validate()?;
        let pose = trajectory.pose_at(trajectory.start_time());
        Ok(IndenterState {
            shape,
            pose,
            lin_vel: Vec3::zero(),
            ang_vel: Vec3::zero(),
            trajectory,
            friction: DEFAULT_FRICTION,
            softness: DEFAULT_SOFTNESS,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if !(self.softness > 0.0) || !(self.friction >= 0.0) {
            return Err(Error::InvalidParameter("softness must be > 0 and friction >= 0".into()));
        }
        let r = self.pose.rotation.to_matrix();
        let rrt = r * r.transpose();
        let off = (rrt - crate::linalg::Mat3::identity()).frobenius_sq().sqrt();
        if off > 1e-9 {
            return Err(Error::InvalidParameter(format!("indenter pose is not orthonormal ({off:e})")));
        }
        Ok(())
    }

    pub fn sdf(&self, p: Vec3<f64>) -> SdfSample {
        sdf_query(&self.shape, &self.pose, p)
    }

    /// Rigid-body velocity of the indenter material point at world position `p`.
    pub fn surface_velocity(&self, p: Vec3<f64>) -> Vec3<f64> {
        self.lin_vel + self.ang_vel.cross(p - self.pose.translation)
    }

    /// Contact distance in mm for a lattice of spacing `h`.
    pub fn contact_radius(&self, h: f64) -> f64 {
        h / self.softness
    }
}

/// Sets the indenter pose at time `t` and its velocities by forward difference
/// over `dt`; past either end of the trajectory the pose is clamped and the
/// velocities vanish.
pub fn fk_step(indenter: &mut IndenterState, t: f64, dt: f64) {
    let (pose, lin, ang) = indenter.trajectory.kinematics_at(t, dt);
    indenter.pose = pose;
    indenter.lin_vel = lin;
    indenter.ang_vel = ang;
}
