//! Fisheye camera at the sensor base that ray-casts the gel's inner surface.
//!
//! The camera frame shares the world axes (looking along +z from
//! `position`). Image rows run top to bottom; pixel offsets map to +x to the
//! right and +y downwards.

use crate::error::{Error, Result};
use crate::image::{read_pbm, read_pfm, read_ppm, write_pbm, write_pfm, write_ppm, RgbImage};
use crate::linalg::Vec3;
use crate::mpm::ParticleSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalMode {
    /// Geometric normal of the hit triangle.
    Flat,
    /// Barycentric blend of area-weighted vertex normals.
    Smooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    /// Polar angle covered by the image disc, radians.
    pub fov: f64,
    pub position: Vec3<f64>,
    /// mm
    pub max_depth: f64,
    pub normals: NormalMode,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            width: 64,
            height: 64,
            fov: std::f64::consts::FRAC_PI_2,
            position: Vec3::zero(),
            max_depth: 20.0,
            normals: NormalMode::Flat,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::InvalidParameter(format!(
                "camera must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.fov > 0.0 && self.fov <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!("camera fov must be in (0, pi/2], got {}", self.fov)));
        }
        if !(self.max_depth > 0.0) || !self.position.is_finite() {
            return Err(Error::InvalidParameter("camera max_depth must be > 0".into()));
        }
        Ok(())
    }
}

/// Equidistant fisheye: the normalized offset from the image centre, scaled
/// so the inscribed disc has radius 1, maps linearly to the polar angle.
/// Pixels outside the disc have no ray.
pub fn pixel_to_ray(u: usize, v: usize, cfg: &CameraConfig) -> Option<Vec3<f64>> {
    let dx = (u as f64 + 0.5) / cfg.width as f64 - 0.5;
    let dy = (v as f64 + 0.5) / cfg.height as f64 - 0.5;
    let r = 2.0 * (dx * dx + dy * dy).sqrt();
    if r > 1.0 {
        return None;
    }
    let polar = r * cfg.fov;
    let azimuth = dy.atan2(dx);
    Some(Vec3::new(polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()))
}

/// Triangulated gel surface whose vertices are the surface-flagged particles.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMesh {
    /// Particle index of every vertex.
    pub particle_index: Vec<usize>,
    pub vertices: Vec<Vec3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl SurfaceMesh {
    /// Moves the vertices to the current particle positions.
    pub fn pose(&mut self, particles: &ParticleSet<f64>) -> Result<()> {
        for (v, &i) in self.vertices.iter_mut().zip(&self.particle_index) {
            *v = *particles.x.get(i).ok_or(Error::SizeMismatch(i, particles.len()))?;
        }
        Ok(())
    }

    pub fn posed(&self, particles: &ParticleSet<f64>) -> Result<SurfaceMesh> {
        let mut m = self.clone();
        m.pose(particles)?;
        Ok(m)
    }

    /// Undirected edge count.
    pub fn edge_count(&self) -> usize {
        let mut edges = std::collections::HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    /// V − E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }
}

/// Azimuthal-equidistant map of a direction on the upper hemisphere onto the unit disc.
fn disc_coords(p: Vec3<f64>) -> [f64; 2] {
    let n = p.norm();
    let polar = (p.z / n).clamp(-1.0, 1.0).acos();
    let r = polar / std::f64::consts::FRAC_PI_2;
    let az = p.y.atan2(p.x);
    [r * az.cos(), r * az.sin()]
}

fn coord(p: [f64; 2]) -> robust::Coord<f64> {
    robust::Coord { x: p[0], y: p[1] }
}

/// Bowyer–Watson Delaunay triangulation with exact predicates. Returns
/// counter-clockwise triangles over the input indices.
pub fn delaunay_2d(points: &[[f64; 2]]) -> Result<Vec<[u32; 3]>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!("triangulation needs 3 points, got {n}")));
    }
    let mut seen = std::collections::HashSet::new();
    for p in points {
        if !seen.insert((p[0].to_bits(), p[1].to_bits())) {
            return Err(Error::InvalidParameter(format!("duplicate triangulation point {p:?}")));
        }
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let big = 1e4 * span;
    let mut pts = points.to_vec();
    pts.push([mid[0] - big, mid[1] - big]);
    pts.push([mid[0] + big, mid[1] - big]);
    pts.push([mid[0], mid[1] + big]);
    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];
    for i in 0..n {
        let p = coord(pts[i]);
        let mut bad = Vec::new();
        tris.retain(|t| {
            let inside = robust::incircle(coord(pts[t[0]]), coord(pts[t[1]]), coord(pts[t[2]]), p) > 0.0;
            if inside {
                bad.push(*t);
            }
            !inside
        });
        if bad.is_empty() {
            return Err(Error::InvalidParameter(format!("point {i} lies outside the triangulation")));
        }
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if count[&(a.min(b), a.max(b))] == 1 {
                    tris.push([a, b, i]);
                }
            }
        }
    }
    let out: Vec<[u32; 3]> =
        tris.into_iter().filter(|t| t.iter().all(|&v| v < n)).map(|t| t.map(|v| v as u32)).collect();
    if out.is_empty() {
        return Err(Error::InvalidParameter("degenerate (collinear) point set".into()));
    }
    Ok(out)
}

/// Triangulates the surface-flagged particles through their directions from
/// the sensor centre, projected to a disc. Connectivity is fixed from here on.
pub fn build_surface_mesh(particles: &ParticleSet<f64>, radius: f64) -> Result<SurfaceMesh> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("sensor radius must be > 0".into()));
    }
    let particle_index = particles.surface_indices();
    if particle_index.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "surface mesh needs at least 4 surface particles, got {}",
            particle_index.len()
        )));
    }
    let vertices: Vec<Vec3<f64>> = particle_index.iter().map(|&i| particles.x[i]).collect();
    if vertices.iter().any(|p| p.norm() < 1e-9 * radius) {
        return Err(Error::InvalidParameter("surface particle at the sensor centre".into()));
    }
    let disc: Vec<[f64; 2]> = vertices.iter().map(|p| disc_coords(*p)).collect();
    let triangles = delaunay_2d(&disc)?;
    Ok(SurfaceMesh { particle_index, vertices, triangles })
}

#[derive(Clone, Copy, Debug)]
struct Ray {
    origin: Vec3<f64>,
    dir: Vec3<f64>,
    kx: usize,
    ky: usize,
    kz: usize,
    shear: [f64; 3],
}

impl Ray {
    fn new(origin: Vec3<f64>, dir: Vec3<f64>) -> Self {
        let a = [dir.x.abs(), dir.y.abs(), dir.z.abs()];
        let kz = if a[0] >= a[1] && a[0] >= a[2] {
            0
        } else if a[1] >= a[2] {
            1
        } else {
            2
        };
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        let shear = [dir[kx] / dir[kz], dir[ky] / dir[kz], 1.0 / dir[kz]];
        Ray { origin, dir, kx, ky, kz, shear }
    }

    /// Watertight ray–triangle test; returns the ray parameter and the
    /// barycentric weights of (a, b, c).
    fn hit(&self, a: Vec3<f64>, b: Vec3<f64>, c: Vec3<f64>) -> Option<(f64, [f64; 3])> {
        let (kx, ky, kz) = (self.kx, self.ky, self.kz);
        let [sx, sy, sz] = self.shear;
        let (a, b, c) = (a - self.origin, b - self.origin, c - self.origin);
        let (ax, ay) = (a[kx] - sx * a[kz], a[ky] - sy * a[kz]);
        let (bx, by) = (b[kx] - sx * b[kz], b[ky] - sy * b[kz]);
        let (cx, cy) = (c[kx] - sx * c[kz], c[ky] - sy * c[kz]);
        let u = cx * by - cy * bx;
        let v = ax * cy - ay * cx;
        let w = bx * ay - by * ax;
        if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
            return None;
        }
        let det = u + v + w;
        if det == 0.0 {
            return None;
        }
        let t = (u * sz * a[kz] + v * sz * b[kz] + w * sz * c[kz]) / det;
        if !(t > 0.0) {
            return None;
        }
        Some((t, [u / det, v / det, w / det]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Hit {
    t: f64,
    tri: usize,
    bary: [f64; 3],
}

fn closer(a: Option<Hit>, b: Hit) -> Hit {
    match a {
        Some(a) if a.t < b.t || (a.t == b.t && a.tri < b.tri) => a,
        _ => b,
    }
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Vec3<f64>,
    hi: Vec3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Aabb { lo: Vec3::splat(f64::INFINITY), hi: Vec3::splat(f64::NEG_INFINITY) }
    }

    fn grow(&mut self, p: Vec3<f64>) {
        self.lo = self.lo.component_min(p);
        self.hi = self.hi.component_max(p);
    }

    /// Entry parameter of the ray into the box, if it enters before `t_max`.
    fn entry(&self, ray: &Ray, t_max: f64) -> Option<f64> {
        let (mut t0, mut t1) = (0.0f64, t_max);
        for k in 0..3 {
            let (o, d) = (ray.origin[k], ray.dir[k]);
            if d == 0.0 {
                if o < self.lo[k] || o > self.hi[k] {
                    return None;
                }
                continue;
            }
            let (mut a, mut b) = ((self.lo[k] - o) / d, (self.hi[k] - o) / d);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { bounds: Aabb, tris: Vec<usize> },
    Inner { bounds: Aabb, left: Box<Node>, right: Box<Node> },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Bounding-volume hierarchy over a posed surface mesh.
#[derive(Clone, Debug)]
pub struct Bvh {
    root: Node,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn build(mesh: &SurfaceMesh) -> Self {
        let centroid = |t: usize| {
            let [a, b, c] = mesh.triangles[t].map(|i| mesh.vertices[i as usize]);
            (a + b + c) * (1.0 / 3.0)
        };
        fn rec(mesh: &SurfaceMesh, mut tris: Vec<usize>, centroid: &dyn Fn(usize) -> Vec3<f64>) -> Node {
            let mut bounds = Aabb::empty();
            let mut cb = Aabb::empty();
            for &t in &tris {
                for &i in &mesh.triangles[t] {
                    bounds.grow(mesh.vertices[i as usize]);
                }
                cb.grow(centroid(t));
            }
            if tris.len() <= LEAF_SIZE {
                return Node::Leaf { bounds, tris };
            }
            let ext = cb.hi - cb.lo;
            let axis = if ext.x >= ext.y && ext.x >= ext.z {
                0
            } else if ext.y >= ext.z {
                1
            } else {
                2
            };
            tris.sort_by(|&a, &b| centroid(a)[axis].total_cmp(&centroid(b)[axis]).then(a.cmp(&b)));
            let right = tris.split_off(tris.len() / 2);
            Node::Inner {
                bounds,
                left: Box::new(rec(mesh, tris, centroid)),
                right: Box::new(rec(mesh, right, centroid)),
            }
        }
        Bvh { root: rec(mesh, (0..mesh.triangles.len()).collect(), &centroid) }
    }

    fn intersect(&self, mesh: &SurfaceMesh, ray: &Ray) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            let t_max = best.map(|h| h.t).unwrap_or(f64::INFINITY);
            if node.bounds().entry(ray, t_max).is_none() {
                continue;
            }
            match node {
                Node::Leaf { tris, .. } => {
                    for &t in tris {
                        if let Some(h) = tri_hit(mesh, ray, t) {
                            best = Some(closer(best, h));
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }
}

fn tri_hit(mesh: &SurfaceMesh, ray: &Ray, t: usize) -> Option<Hit> {
    let [a, b, c] = mesh.triangles[t].map(|i| mesh.vertices[i as usize]);
    ray.hit(a, b, c).map(|(tp, bary)| Hit { t: tp, tri: t, bary })
}

fn brute_intersect(mesh: &SurfaceMesh, ray: &Ray) -> Option<Hit> {
    let mut best = None;
    for t in 0..mesh.triangles.len() {
        if let Some(h) = tri_hit(mesh, ray, t) {
            best = Some(closer(best, h));
        }
    }
    best
}

/// Depth, normal and validity maps for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TactileGeometryFrame {
    pub width: usize,
    pub height: usize,
    pub max_depth: f64,
    /// mm; `max_depth` where nothing was hit.
    pub depth: Vec<f64>,
    /// Unit normals facing the camera; `(0, 0, -1)` where nothing was hit.
    pub normal: Vec<Vec3<f64>>,
    pub valid: Vec<bool>,
}

pub const MISS_NORMAL: Vec3<f64> = Vec3 { x: 0.0, y: 0.0, z: -1.0 };

impl TactileGeometryFrame {
    pub fn empty(cfg: &CameraConfig) -> Self {
        let n = cfg.width * cfg.height;
        TactileGeometryFrame {
            width: cfg.width,
            height: cfg.height,
            max_depth: cfg.max_depth,
            depth: vec![cfg.max_depth; n],
            normal: vec![MISS_NORMAL; n],
            valid: vec![false; n],
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Minimum depth over valid pixels and its pixel index.
    pub fn min_depth(&self) -> Option<(f64, usize)> {
        self.depth
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter(|(_, (_, v))| **v)
            .map(|(i, (d, _))| (*d, i))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    /// Normal map encoded as `(n + 1) / 2` per channel.
    pub fn normal_image(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.normal.iter().map(|n| [n.x, n.y, n.z].map(|c| 0.5 * (c + 1.0))).collect(),
        }
    }

    /// Writes `<stem>.pfm` (depth), `<stem>.normal.ppm` and `<stem>.mask.pbm` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_pfm(&dir.join(format!("{stem}.pfm")), self.width, self.height, &self.depth)?;
        write_ppm(&dir.join(format!("{stem}.normal.ppm")), &self.normal_image())?;
        write_pbm(&dir.join(format!("{stem}.mask.pbm")), self.width, self.height, &self.valid)
    }

    /// Reads maps written by [`write`](Self::write). Normals come back from
    /// 8-bit storage and are renormalized.
    pub fn read(dir: &Path, stem: &str, max_depth: f64) -> Result<Self> {
        let (w, h, depth) = read_pfm(&dir.join(format!("{stem}.pfm")))?;
        let img = read_ppm(&dir.join(format!("{stem}.normal.ppm")))?;
        let (mw, mh, valid) = read_pbm(&dir.join(format!("{stem}.mask.pbm")))?;
        if (img.width, img.height) != (w, h) || (mw, mh) != (w, h) {
            return Err(Error::ShapeMismatch(format!("maps for {stem} disagree in size")));
        }
        let normal = img
            .data
            .iter()
            .zip(&valid)
            .map(|(c, &ok)| {
                let n = Vec3::new(2.0 * c[0] - 1.0, 2.0 * c[1] - 1.0, 2.0 * c[2] - 1.0);
                if ok && n.norm() > 0.0 {
                    n.normalized()
                } else {
                    MISS_NORMAL
                }
            })
            .collect();
        Ok(TactileGeometryFrame { width: w, height: h, max_depth, depth, normal, valid })
    }
}

fn vertex_normals(mesh: &SurfaceMesh) -> Vec<Vec3<f64>> {
    let mut n = vec![Vec3::zero(); mesh.vertices.len()];
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| mesh.vertices[i as usize]);
        let face = (b - a).cross(c - a);
        for &i in t {
            n[i as usize] += face;
        }
    }
    n.into_iter().map(|v| if v.norm() > 0.0 { v.normalized() } else { v }).collect()
}

fn shade(mesh: &SurfaceMesh, vn: &[Vec3<f64>], cfg: &CameraConfig, dir: Vec3<f64>, h: Hit) -> Option<Vec3<f64>> {
    let tri = mesh.triangles[h.tri];
    let mut n = match cfg.normals {
        NormalMode::Flat => {
            let [a, b, c] = tri.map(|i| mesh.vertices[i as usize]);
            (b - a).cross(c - a)
        }
        NormalMode::Smooth => {
            let [a, b, c] = tri.map(|i| vn[i as usize]);
            // Orient vertex normals consistently with the face before blending.
            let face = {
                let [p, q, r] = tri.map(|i| mesh.vertices[i as usize]);
                (q - p).cross(r - p)
            };
            let s = |v: Vec3<f64>| if v.dot(face) < 0.0 { -v } else { v };
            s(a) * h.bary[0] + s(b) * h.bary[1] + s(c) * h.bary[2]
        }
    };
    let len = n.norm();
    if !(len > 0.0) {
        return None;
    }
    n = n * (1.0 / len);
    if n.dot(dir) > 0.0 {
        n = -n;
    }
    Some(n)
}

fn render_with(
    mesh: &SurfaceMesh,
    cfg: &CameraConfig,
    cast: &(dyn Fn(&Ray) -> Option<Hit> + Sync),
) -> Result<TactileGeometryFrame> {
    cfg.validate()?;
    let vn = if cfg.normals == NormalMode::Smooth { vertex_normals(mesh) } else { Vec::new() };
    let mut frame = TactileGeometryFrame::empty(cfg);
    let pixels: Vec<Option<(f64, Vec3<f64>)>> = (0..cfg.width * cfg.height)
        .into_par_iter()
        .map(|k| {
            let dir = pixel_to_ray(k % cfg.width, k / cfg.width, cfg)?;
            let ray = Ray::new(cfg.position, dir);
            let hit = cast(&ray)?;
            let depth = hit.t;
            if depth > cfg.max_depth {
                return None;
            }
            Some((depth, shade(mesh, &vn, cfg, dir, hit)?))
        })
        .collect();
    for (k, px) in pixels.into_iter().enumerate() {
        if let Some((d, n)) = px {
            frame.depth[k] = d;
            frame.normal[k] = n;
            frame.valid[k] = true;
        }
    }
    Ok(frame)
}

/// Reference renderer testing every triangle for every ray.
pub fn render_maps_brute(mesh: &SurfaceMesh, cfg: &CameraConfig) -> Result<TactileGeometryFrame> {
    render_with(mesh, cfg, &|r| brute_intersect(mesh, r))
}

/// BVH-accelerated renderer; produces the same maps as [`render_maps_brute`].
pub fn render_maps(mesh: &SurfaceMesh, cfg: &CameraConfig) -> Result<TactileGeometryFrame> {
    let bvh = Bvh::build(mesh);
    render_with(mesh, cfg, &|r| bvh.intersect(mesh, r))
}
