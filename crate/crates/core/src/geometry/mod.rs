//! Meshes, point clouds, indenter shapes and trajectories (all lengths in mm).

mod io;
mod particles;
mod sample;
mod sdf;

pub use io::{
    fmt_sig9, load_cloud, load_mesh, load_mesh_with, load_ply, load_trajectory, load_xyz, parse_obj, save_mesh,
    save_ply, save_trajectory, save_xyz, DegeneratePolicy,
};
pub use particles::{fill_hemisphere_particles, HemisphereFill};
pub use sample::{sample_surface, subsample_cloud};
pub use sdf::{sdf_query, MeshSdf, SdfSample};

use crate::error::{Error, Result};
use crate::linalg::{Pose, Quat, Vec3};
use serde::{Deserialize, Serialize};

/// Smallest triangle area accepted by [`TriMesh::new`].
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    /// Validates indices and rejects degenerate triangles.
    pub fn new(vertices: Vec<Vec3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = TriMesh { vertices, triangles };
        for (k, t) in mesh.triangles.iter().enumerate() {
            for &i in t {
                if i as usize >= mesh.vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        line: k + 1,
                        index: i as i64 + 1,
                        count: mesh.vertices.len(),
                    });
                }
            }
            let area = mesh.triangle_area(k);
            if area.is_nan() || area <= MIN_TRIANGLE_AREA {
                return Err(Error::DegenerateTriangle { line: k + 1, area });
            }
        }
        Ok(mesh)
    }

    pub fn corners(&self, k: usize) -> [Vec3<f64>; 3] {
        let [a, b, c] = self.triangles[k];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.corners(k);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|k| self.triangle_area(k)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn bounds(&self) -> (Vec3<f64>, Vec3<f64>) {
        bounds(&self.vertices)
    }

    /// Axis-aligned box, 12 triangles, outward winding.
    pub fn cuboid(half: Vec3<f64>) -> Self {
        let v = |sx: f64, sy: f64, sz: f64| Vec3::new(sx * half.x, sy * half.y, sz * half.z);
        let vertices = vec![
            v(-1., -1., -1.),
            v(1., -1., -1.),
            v(1., 1., -1.),
            v(-1., 1., -1.),
            v(-1., -1., 1.),
            v(1., -1., 1.),
            v(1., 1., 1.),
            v(-1., 1., 1.),
        ];
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        TriMesh { vertices, triangles }
    }

    /// Closed cone with apex at +z, base disc at z = 0.
    pub fn cone(radius: f64, height: f64, segments: usize) -> Self {
        let mut vertices = vec![Vec3::new(0.0, 0.0, height), Vec3::new(0.0, 0.0, 0.0)];
        for k in 0..segments {
            let a = std::f64::consts::TAU * k as f64 / segments as f64;
            vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), 0.0));
        }
        let mut triangles = Vec::new();
        for k in 0..segments {
            let i = 2 + k as u32;
            let j = 2 + ((k + 1) % segments) as u32;
            triangles.push([0, i, j]);
            triangles.push([1, j, i]);
        }
        TriMesh { vertices, triangles }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3<f64>>) -> Self {
        PointCloud { points }
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.is_finite())
    }
    pub fn translated(&self, t: Vec3<f64>) -> Self {
        PointCloud::new(self.points.iter().map(|p| *p + t).collect())
    }
    pub fn transformed(&self, pose: &Pose) -> Self {
        PointCloud::new(self.points.iter().map(|p| pose.transform_point(*p)).collect())
    }
    pub fn bounds(&self) -> (Vec3<f64>, Vec3<f64>) {
        bounds(&self.points)
    }
}

pub(crate) fn bounds(points: &[Vec3<f64>]) -> (Vec3<f64>, Vec3<f64>) {
    let mut lo = Vec3::splat(f64::INFINITY);
    let mut hi = Vec3::splat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.component_min(*p);
        hi = hi.component_max(*p);
    }
    (lo, hi)
}

/// Indenter geometry in its local frame; capsules and cylinders run along local z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IndenterShape {
    Sphere {
        radius: f64,
    },
    Box {
        half_extents: [f64; 3],
    },
    Capsule {
        radius: f64,
        half_length: f64,
    },
    Cylinder {
        radius: f64,
        half_length: f64,
    },
    #[serde(skip)]
    MeshSdf(Box<MeshSdf>),
}

impl IndenterShape {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let good = match self {
            IndenterShape::Sphere { radius } => ok(*radius),
            IndenterShape::Box { half_extents } => half_extents.iter().all(|v| ok(*v)),
            IndenterShape::Capsule { radius, half_length } | IndenterShape::Cylinder { radius, half_length } => {
                ok(*radius) && ok(*half_length)
            }
            IndenterShape::MeshSdf(m) => ok(m.resolution()),
        };
        if good {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("indenter dimensions must be > 0: {self:?}")))
        }
    }

    /// Largest local-frame distance from the origin to any surface point.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            IndenterShape::Sphere { radius } => *radius,
            IndenterShape::Box { half_extents } => Vec3::from_array(*half_extents).norm(),
            IndenterShape::Capsule { radius, half_length } => radius + half_length,
            IndenterShape::Cylinder { radius, half_length } => radius.hypot(*half_length),
            IndenterShape::MeshSdf(m) => {
                let (lo, hi) = m.mesh().bounds();
                lo.norm().max(hi.norm())
            }
        }
    }

    /// Distance from the local origin to the lowest point along local −z.
    pub fn bottom_extent(&self) -> f64 {
        match self {
            IndenterShape::Sphere { radius } => *radius,
            IndenterShape::Box { half_extents } => half_extents[2],
            IndenterShape::Capsule { radius, half_length } => radius + half_length,
            IndenterShape::Cylinder { half_length, .. } => *half_length,
            IndenterShape::MeshSdf(m) => -m.mesh().bounds().0.z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec3<f64>,
    pub orientation: Quat,
}

/// Time-stamped indenter poses, `t` strictly increasing.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("trajectory"));
        }
        for w in samples.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::InvalidParameter(format!(
                    "trajectory times must be strictly increasing ({} then {})",
                    w[0].t, w[1].t
                )));
            }
        }
        for s in &samples {
            if (s.orientation.norm() - 1.0).abs() > 1e-9 || !s.t.is_finite() || !s.position.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "trajectory sample at t={} has a non-unit quaternion or non-finite value",
                    s.t
                )));
            }
        }
        Ok(Trajectory { samples })
    }

    /// Straight-line path with constant orientation through `(t, position)` waypoints.
    pub fn from_positions(points: &[(f64, Vec3<f64>)]) -> Result<Self> {
        Self::new(
            points.iter().map(|&(t, position)| TrajectorySample { t, position, orientation: Quat::IDENTITY }).collect(),
        )
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Pose at `t`: linear position, slerped orientation, clamped at both ends.
    pub fn pose_at(&self, t: f64) -> Pose {
        let s = &self.samples;
        if t <= s[0].t {
            return Pose::new(s[0].position, s[0].orientation);
        }
        let last = s[s.len() - 1];
        if t >= last.t {
            return Pose::new(last.position, last.orientation);
        }
        let k = s.partition_point(|x| x.t <= t) - 1;
        let (a, b) = (s[k], s[k + 1]);
        let u = (t - a.t) / (b.t - a.t);
        let position = a.position + (b.position - a.position) * u;
        Pose::new(position, a.orientation.slerp(&b.orientation, u))
    }

    /// Pose at `t` with world-frame linear and angular velocity from a forward
    /// difference over `dt`.
    pub fn kinematics_at(&self, t: f64, dt: f64) -> (Pose, Vec3<f64>, Vec3<f64>) {
        let p0 = self.pose_at(t);
        let p1 = self.pose_at(t + dt);
        let lin = (p1.translation - p0.translation) * (1.0 / dt);
        let dq = p1.rotation.mul(&p0.rotation.conjugate());
        let ang = dq.to_rotation_vector() * (1.0 / dt);
        (p0, lin, ang)
    }
}
