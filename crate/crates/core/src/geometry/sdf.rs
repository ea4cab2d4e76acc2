//! Signed distance queries for indenter shapes.

use super::{IndenterShape, TriMesh};
use crate::error::{Error, Result};
use crate::linalg::{Pose, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdfSample {
    /// Signed distance in mm, negative inside.
    pub distance: f64,
    /// Unit gradient, world frame.
    pub gradient: Vec3<f64>,
    /// Set when a mesh SDF was queried outside its sampled grid.
    pub extrapolated: bool,
}

/// Signed distance and outward gradient of `shape` placed at `pose`, at world point `p`.
pub fn sdf_query(shape: &IndenterShape, pose: &Pose, p: Vec3<f64>) -> SdfSample {
    let local = pose.inverse_transform_point(p);
    let (distance, g, extrapolated) = match shape {
        IndenterShape::Sphere { radius } => {
            let (d, g) = sphere(local, *radius);
            (d, g, false)
        }
        IndenterShape::Box { half_extents } => {
            let (d, g) = cuboid(local, Vec3::from_array(*half_extents));
            (d, g, false)
        }
        IndenterShape::Capsule { radius, half_length } => {
            let (d, g) = capsule(local, *radius, *half_length);
            (d, g, false)
        }
        IndenterShape::Cylinder { radius, half_length } => {
            let (d, g) = cylinder(local, *radius, *half_length);
            (d, g, false)
        }
        IndenterShape::MeshSdf(m) => m.query(local),
    };
    SdfSample { distance, gradient: pose.rotate_vector(g), extrapolated }
}

const Z: Vec3<f64> = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

fn sphere(p: Vec3<f64>, r: f64) -> (f64, Vec3<f64>) {
    let n = p.norm();
    // The centre has no defined gradient; +z by convention.
    let g = if n > 0.0 { p * (1.0 / n) } else { Z };
    (n - r, g)
}

fn cuboid(p: Vec3<f64>, b: Vec3<f64>) -> (f64, Vec3<f64>) {
    let q = Vec3::new(p.x.abs() - b.x, p.y.abs() - b.y, p.z.abs() - b.z);
    let outside = q.component_max(Vec3::zero());
    let out_len = outside.norm();
    let sign = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
    if out_len > 0.0 {
        let g = Vec3::new(sign(p.x) * outside.x, sign(p.y) * outside.y, sign(p.z) * outside.z) * (1.0 / out_len);
        (out_len, g)
    } else {
        // Inside: nearest face wins, ties resolved x, then y, then z.
        let mut axis = 0;
        for k in 1..3 {
            if q[k] > q[axis] {
                axis = k;
            }
        }
        let mut g = Vec3::zero();
        g[axis] = sign(p[axis]);
        (q[axis], g)
    }
}

fn capsule(p: Vec3<f64>, r: f64, hl: f64) -> (f64, Vec3<f64>) {
    let c = Vec3::new(0.0, 0.0, p.z.clamp(-hl, hl));
    let d = p - c;
    let n = d.norm();
    let g = if n > 0.0 { d * (1.0 / n) } else { Vec3::new(1.0, 0.0, 0.0) };
    (n - r, g)
}

fn cylinder(p: Vec3<f64>, r: f64, hl: f64) -> (f64, Vec3<f64>) {
    let rho = p.x.hypot(p.y);
    let radial = if rho > 0.0 { Vec3::new(p.x / rho, p.y / rho, 0.0) } else { Vec3::new(1.0, 0.0, 0.0) };
    let axial = Vec3::new(0.0, 0.0, if p.z < 0.0 { -1.0 } else { 1.0 });
    let dr = rho - r;
    let dz = p.z.abs() - hl;
    if dr > 0.0 && dz > 0.0 {
        let n = dr.hypot(dz);
        ((n), (radial * dr + axial * dz) * (1.0 / n))
    } else if dr > 0.0 {
        (dr, radial)
    } else if dz > 0.0 {
        (dz, axial)
    } else if dr >= dz {
        (dr, radial)
    } else {
        (dz, axial)
    }
}

/// Mesh SDF sampled on a regular grid, trilinearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshSdf {
    mesh: TriMesh,
    origin: Vec3<f64>,
    resolution: f64,
    dims: [usize; 3],
    values: Vec<f64>,
}

impl MeshSdf {
    /// Samples the SDF over the mesh bounds plus a 3-voxel margin.
    /// Inside/outside comes from ray-crossing parity along +x.
    pub fn build(mesh: TriMesh, resolution: f64) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::Empty("mesh"));
        }
        if !(resolution > 0.0) {
            return Err(Error::InvalidParameter("mesh SDF resolution must be > 0".into()));
        }
        let margin = 3.0 * resolution;
        let (lo, hi) = mesh.bounds();
        let origin = lo - Vec3::splat(margin);
        let ext = hi - lo + Vec3::splat(2.0 * margin);
        let dims = [0, 1, 2].map(|k| (ext[k] / resolution).ceil() as usize + 1);
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = origin + Vec3::new(i as f64, j as f64, k as f64) * resolution;
                    let d = unsigned_distance(&mesh, p);
                    values.push(if is_inside(&mesh, p) { -d } else { d });
                }
            }
        }
        Ok(MeshSdf { mesh, origin, resolution, dims, values })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    fn upper(&self) -> Vec3<f64> {
        self.origin
            + Vec3::new((self.dims[0] - 1) as f64, (self.dims[1] - 1) as f64, (self.dims[2] - 1) as f64)
                * self.resolution
    }

    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(k * self.dims[1] + j) * self.dims[0] + i]
    }

    fn trilinear(&self, p: Vec3<f64>) -> f64 {
        let g = (p - self.origin) * (1.0 / self.resolution);
        let mut idx = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let max_cell = self.dims[a] - 2;
            let f = g[a].clamp(0.0, (self.dims[a] - 1) as f64);
            let i = (f.floor() as usize).min(max_cell);
            idx[a] = i;
            frac[a] = f - i as f64;
        }
        let mut acc = 0.0;
        for dk in 0..2 {
            for dj in 0..2 {
                for di in 0..2 {
                    let w = if di == 1 { frac[0] } else { 1.0 - frac[0] }
                        * if dj == 1 { frac[1] } else { 1.0 - frac[1] }
                        * if dk == 1 { frac[2] } else { 1.0 - frac[2] };
                    acc += w * self.at(idx[0] + di, idx[1] + dj, idx[2] + dk);
                }
            }
        }
        acc
    }

    /// Local-frame query; outside the grid the point is clamped onto it and the
    /// clamp distance is added.
    pub fn query(&self, p: Vec3<f64>) -> (f64, Vec3<f64>, bool) {
        let clamped = p.component_max(self.origin).component_min(self.upper());
        let excess = (p - clamped).norm();
        let h = 0.5 * self.resolution;
        let mut g = Vec3::zero();
        for a in 0..3 {
            let mut e = Vec3::zero();
            e[a] = h;
            g[a] = (self.trilinear(clamped + e) - self.trilinear(clamped - e)) / (2.0 * h);
        }
        if excess > 0.0 {
            let out = (p - clamped) * (1.0 / excess);
            let d = self.trilinear(clamped) + excess;
            let n = g.norm();
            let g = if n > 0.0 { (g * (1.0 / n) + out).normalized() } else { out };
            return (d, g, true);
        }
        let n = g.norm();
        let g = if n > 0.0 { g * (1.0 / n) } else { Z };
        (self.trilinear(clamped), g, false)
    }
}

pub(crate) fn closest_point_on_triangle(p: Vec3<f64>, a: Vec3<f64>, b: Vec3<f64>, c: Vec3<f64>) -> Vec3<f64> {
    // Ericson, Real-Time Collision Detection, 5.1.5.
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

fn unsigned_distance(mesh: &TriMesh, p: Vec3<f64>) -> f64 {
    (0..mesh.triangles.len())
        .map(|k| {
            let [a, b, c] = mesh.corners(k);
            (closest_point_on_triangle(p, a, b, c) - p).norm_sq()
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

enum Crossing {
    Miss,
    Hit,
    Ambiguous,
}

fn ray_crossing(o: Vec3<f64>, d: Vec3<f64>, a: Vec3<f64>, b: Vec3<f64>, c: Vec3<f64>) -> Crossing {
    let e1 = b - a;
    let e2 = c - a;
    let pv = d.cross(e2);
    let det = e1.dot(pv);
    if det.abs() < 1e-14 {
        return Crossing::Miss;
    }
    let inv = 1.0 / det;
    let tv = o - a;
    let u = tv.dot(pv) * inv;
    let qv = tv.cross(e1);
    let v = d.dot(qv) * inv;
    let t = e2.dot(qv) * inv;
    let eps = 1e-9;
    if u < -eps || v < -eps || u + v > 1.0 + eps || t < -eps {
        return Crossing::Miss;
    }
    if u < eps || v < eps || u + v > 1.0 - eps || t < eps {
        return Crossing::Ambiguous;
    }
    Crossing::Hit
}

fn is_inside(mesh: &TriMesh, p: Vec3<f64>) -> bool {
    let dirs = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 1.3e-3, 0.7e-3),
        Vec3::new(1.0, -2.1e-3, 1.9e-3),
        Vec3::new(1.0, 3.7e-3, -2.9e-3),
        Vec3::new(1.0, 0.31, 0.17),
    ];
    'dirs: for d in dirs {
        let mut count = 0;
        for k in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.corners(k);
            match ray_crossing(p, d, a, b, c) {
                Crossing::Miss => {}
                Crossing::Hit => count += 1,
                Crossing::Ambiguous => continue 'dirs,
            }
        }
        return count % 2 == 1;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Quat;

    fn shapes() -> Vec<IndenterShape> {
        vec![
            IndenterShape::Sphere { radius: 5.0 },
            IndenterShape::Box { half_extents: [1.0, 2.0, 1.5] },
            IndenterShape::Capsule { radius: 1.0, half_length: 2.0 },
            IndenterShape::Cylinder { radius: 1.5, half_length: 1.0 },
        ]
    }

    #[test]
    fn sphere_examples() {
        let s = IndenterShape::Sphere { radius: 5.0 };
        let q = sdf_query(&s, &Pose::default(), Vec3::new(0.0, 0.0, 7.0));
        assert_eq!(q.distance, 2.0);
        assert_eq!(q.gradient, Z);
        let q = sdf_query(&s, &Pose::default(), Vec3::zero());
        assert_eq!(q.distance, -5.0);
        assert_eq!(q.gradient, Z);
    }

    #[test]
    fn box_example() {
        let s = IndenterShape::Box { half_extents: [1.0, 1.0, 1.0] };
        let q = sdf_query(&s, &Pose::default(), Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(q.distance, 1.0);
        assert_eq!(q.gradient, Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn gradients_match_central_differences() {
        let pose = Pose::new(Vec3::new(0.3, -0.2, 1.0), Quat::from_axis_angle(Vec3::new(1.0, 2.0, 0.5), 0.6));
        let h = 1e-4;
        let probes = [
            Vec3::new(3.1, 0.4, 2.2),
            Vec3::new(-0.9, 2.7, 0.1),
            Vec3::new(0.2, 0.1, 4.3),
            Vec3::new(0.5, 0.3, 1.2),
            Vec3::new(-2.5, -1.7, -0.4),
        ];
        for s in shapes() {
            for p in probes {
                let q = sdf_query(&s, &pose, p);
                assert!((q.gradient.norm() - 1.0).abs() < 1e-6);
                let mut fd = Vec3::zero();
                for a in 0..3 {
                    let mut e = Vec3::zero();
                    e[a] = h;
                    fd[a] = (sdf_query(&s, &pose, p + e).distance - sdf_query(&s, &pose, p - e).distance) / (2.0 * h);
                }
                assert!((fd - q.gradient).norm() < 1e-3, "{s:?} at {p:?}: {fd:?} vs {:?}", q.gradient);
            }
        }
    }

    #[test]
    fn mesh_sdf_matches_analytic_box() {
        let half = Vec3::new(1.0, 1.5, 2.0);
        let sdf = MeshSdf::build(TriMesh::cuboid(half), 0.1).unwrap();
        let shape = IndenterShape::MeshSdf(Box::new(sdf));
        let exact = IndenterShape::Box { half_extents: half.to_array() };
        for p in
            [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.2, 0.2, 0.3), Vec3::new(0.1, -1.7, 0.5), Vec3::new(0.2, 0.3, 2.2)]
        {
            let a = sdf_query(&shape, &Pose::default(), p);
            let b = sdf_query(&exact, &Pose::default(), p);
            assert!((a.distance - b.distance).abs() < 0.05, "{p:?}: {} vs {}", a.distance, b.distance);
            assert!(!a.extrapolated);
            assert!((a.gradient.norm() - 1.0).abs() < 1e-3);
        }
        let far = sdf_query(&shape, &Pose::default(), Vec3::new(10.0, 0.0, 0.0));
        assert!(far.extrapolated);
        assert!((far.distance - 9.0).abs() < 0.05);
    }
}
