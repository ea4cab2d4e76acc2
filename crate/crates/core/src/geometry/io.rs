//! OBJ (v/f subset), XYZ, binary PLY and trajectory CSV.

use super::{PointCloud, Trajectory, TrajectorySample, TriMesh, MIN_TRIANGLE_AREA};
use crate::error::{Error, Result};
use crate::linalg::{Quat, Vec3};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// What `load_mesh` does with zero-area faces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DegeneratePolicy {
    #[default]
    WarnAndDrop,
    Error,
}

/// Nine significant digits, round-trippable by `str::parse::<f64>`.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v:.8e}")
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    load_mesh_with(path, DegeneratePolicy::default())
}

pub fn load_mesh_with(path: impl AsRef<Path>, policy: DegeneratePolicy) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path, policy)
}

/// Parses the `v`/`f` subset of Wavefront OBJ. Polygons are fan-split from their
/// first vertex. Negative (relative) indices are accepted.
pub fn parse_obj(text: &str, path: &Path, policy: DegeneratePolicy) -> Result<TriMesh> {
    let parse_err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut vertices = Vec::new();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tok = content.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in xyz.iter_mut() {
                    let t = tok.next().ok_or_else(|| parse_err(line, "vertex needs 3 coordinates".into()))?;
                    *c = t.parse().map_err(|_| parse_err(line, format!("bad coordinate '{t}'")))?;
                }
                vertices.push(Vec3::from_array(xyz));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| parse_err(line, format!("bad face index '{t}'")))?;
                    idx.push(i);
                }
                if idx.len() < 3 {
                    return Err(parse_err(line, "face needs at least 3 vertices".into()));
                }
                // Relative indices refer to vertices seen so far.
                for i in idx.iter_mut() {
                    if *i < 0 {
                        *i += vertices.len() as i64 + 1;
                    }
                }
                faces.push((line, idx));
            }
            Some(other) => log::debug!("{}:{line}: ignoring OBJ record '{other}'", path.display()),
            None => {}
        }
    }
    let n = vertices.len();
    let mut triangles = Vec::new();
    for (line, idx) in faces {
        for &i in &idx {
            if i < 1 || i as usize > n {
                return Err(Error::IndexOutOfRange { line, index: i, count: n });
            }
        }
        for k in 1..idx.len() - 1 {
            let tri = [(idx[0] - 1) as u32, (idx[k] - 1) as u32, (idx[k + 1] - 1) as u32];
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            let area: f64 = 0.5 * (b - a).cross(c - a).norm();
            if area.is_nan() || area <= MIN_TRIANGLE_AREA {
                match policy {
                    DegeneratePolicy::Error => return Err(Error::DegenerateTriangle { line, area }),
                    DegeneratePolicy::WarnAndDrop => {
                        log::warn!("{}:{line}: dropping degenerate triangle", path.display());
                        continue;
                    }
                }
            }
            triangles.push(tri);
        }
    }
    Ok(TriMesh { vertices, triangles })
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_with(path, |w| {
        for v in &mesh.vertices {
            writeln!(w, "v {} {} {}", fmt_sig9(v.x), fmt_sig9(v.y), fmt_sig9(v.z))?;
        }
        for t in &mesh.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    })
}

pub fn save_xyz(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        for p in &cloud.points {
            writeln!(w, "{} {} {}", fmt_sig9(p.x), fmt_sig9(p.y), fmt_sig9(p.z))?;
        }
        Ok(())
    })
}

pub fn load_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (ln, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = t
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { path: path.into(), line: ln + 1, msg: e.to_string() })?;
        if vals.len() != 3 {
            return Err(Error::Parse {
                path: path.into(),
                line: ln + 1,
                msg: format!("expected 3 values, found {}", vals.len()),
            });
        }
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
    }
    Ok(PointCloud::new(points))
}

pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        write!(
            w,
            "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
            cloud.len()
        )?;
        for p in &cloud.points {
            for c in p.to_array() {
                w.write_all(&(c as f32).to_le_bytes())?;
            }
        }
        Ok(())
    })
}

/// Reads binary little-endian PLY whose vertex element is exactly `float x, y, z`.
pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let marker = b"end_header\n";
    let end = data
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::Format("PLY header has no end_header".into()))?;
    let header = std::str::from_utf8(&data[..end]).map_err(|_| Error::Format("PLY header is not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(Error::Format("missing 'ply' magic".into()));
    }
    let mut count = None;
    let mut props = Vec::new();
    for l in lines {
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", f, ..] => return Err(Error::Format(format!("unsupported PLY format {f}"))),
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| Error::Format("bad vertex count".into()))?)
            }
            ["element", other, ..] => return Err(Error::Format(format!("unsupported PLY element {other}"))),
            ["property", ty, name] => props.push((ty.to_string(), name.to_string())),
            ["comment", ..] | [] => {}
            _ => return Err(Error::Format(format!("unexpected PLY header line '{l}'"))),
        }
    }
    let expected = [("float", "x"), ("float", "y"), ("float", "z")];
    if props.len() != 3 || props.iter().zip(expected).any(|(p, e)| p.0 != e.0 || p.1 != e.1) {
        return Err(Error::Format("PLY vertex must be 'float x, float y, float z'".into()));
    }
    let n = count.ok_or_else(|| Error::Format("PLY has no vertex element".into()))?;
    let body = &data[end + marker.len()..];
    if body.len() < n * 12 {
        return Err(Error::Format(format!("PLY body truncated: {} bytes for {n} vertices", body.len())));
    }
    let mut points = Vec::with_capacity(n);
    let mut rd = body;
    for _ in 0..n {
        let mut xyz = [0.0f64; 3];
        for c in xyz.iter_mut() {
            let mut b = [0u8; 4];
            rd.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
            *c = f32::from_le_bytes(b) as f64;
        }
        points.push(Vec3::from_array(xyz));
    }
    Ok(PointCloud::new(points))
}

/// Dispatches on extension: `.ply` binary, anything else XYZ text.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => load_ply(path),
        _ => load_xyz(path),
    }
}

pub const TRAJECTORY_HEADER: &str = "t,x,y,z,qw,qx,qy,qz";

pub fn save_trajectory(tr: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for s in tr.samples() {
            let q = s.orientation;
            let row = [s.t, s.position.x, s.position.y, s.position.z, q.w, q.x, q.y, q.z];
            let cells: Vec<String> = row.iter().map(|v| fmt_sig9(*v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    })
}

/// Loads a trajectory CSV. Quaternions are renormalized when they are off unit
/// length by no more than the 9-digit serialization error.
pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let err = |line: usize, msg: String| Error::Parse { path: path.into(), line, msg };
    match lines.next() {
        Some((_, h)) if h.trim().replace(' ', "") == TRAJECTORY_HEADER => {}
        _ => return Err(err(1, format!("expected header '{TRAJECTORY_HEADER}'"))),
    }
    let mut samples = Vec::new();
    for (ln, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = l
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(ln + 1, e.to_string()))?;
        if v.len() != 8 {
            return Err(err(ln + 1, format!("expected 8 columns, found {}", v.len())));
        }
        let q = Quat::new(v[4], v[5], v[6], v[7]);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(err(ln + 1, format!("quaternion norm {} is not 1", q.norm())));
        }
        samples.push(TrajectorySample { t: v[0], position: Vec3::new(v[1], v[2], v[3]), orientation: q.normalized() });
    }
    Trajectory::new(samples)
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obj(s: &str) -> Result<TriMesh> {
        parse_obj(s, Path::new("test.obj"), DegeneratePolicy::WarnAndDrop)
    }

    #[test]
    fn single_triangle() {
        let m = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn quad_is_fan_split() {
        let m = obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        let m = obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2//2 -2 -1\n").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn out_of_range_index_reports_line() {
        let e = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n").unwrap_err();
        assert!(matches!(e, Error::IndexOutOfRange { line: 4, index: 5, count: 3 }), "{e}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = obj("v 0 0 0\nv 1 zero 0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn degenerate_faces_are_dropped_or_rejected() {
        let src = "v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n";
        assert_eq!(obj(src).unwrap().triangles.len(), 1);
        let e = parse_obj(src, Path::new("x"), DegeneratePolicy::Error).unwrap_err();
        assert!(matches!(e, Error::DegenerateTriangle { line: 5, .. }));
    }

    #[test]
    fn ply_roundtrip_is_float32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ply");
        let cloud = PointCloud::new(vec![Vec3::new(1.5, -2.25, 3.0), Vec3::new(0.1, 0.2, 0.3)]);
        save_ply(&cloud, &p).unwrap();
        let back = load_ply(&p).unwrap();
        for (a, b) in cloud.points.iter().zip(&back.points) {
            assert_eq!(b.x, a.x as f32 as f64);
            assert_eq!(b.z, a.z as f32 as f64);
        }
    }

    #[test]
    fn trajectory_csv_header_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "time,x,y,z\n0,0,0,0\n").unwrap();
        assert!(matches!(load_trajectory(&p), Err(Error::Parse { line: 1, .. })));
    }

    proptest! {
        #[test]
        fn text_formats_roundtrip_to_nine_digits(
            pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3), 1..20)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let cloud = PointCloud::new(pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect());
            let p = dir.path().join("c.xyz");
            save_xyz(&cloud, &p).unwrap();
            let back = load_xyz(&p).unwrap();
            prop_assert_eq!(back.len(), cloud.len());
            for (a, b) in cloud.points.iter().zip(&back.points) {
                prop_assert!((*a - *b).norm() <= 1e-8 * (1.0 + a.norm()));
            }

            let samples: Vec<TrajectorySample> = pts.iter().enumerate().map(|(k, &(x, y, z))| TrajectorySample {
                t: k as f64 * 0.1,
                position: Vec3::new(x, y, z),
                orientation: Quat::from_axis_angle(Vec3::new(x, y + 1.0, 1.0), z * 1e-3),
            }).collect();
            let tr = Trajectory::new(samples).unwrap();
            let p = dir.path().join("t.csv");
            save_trajectory(&tr, &p).unwrap();
            let back = load_trajectory(&p).unwrap();
            for (a, b) in tr.samples().iter().zip(back.samples()) {
                prop_assert!((a.t - b.t).abs() <= 1e-8 * (1.0 + a.t.abs()));
                prop_assert!((a.position - b.position).norm() <= 1e-8 * (1.0 + a.position.norm()));
                prop_assert!((a.orientation.dot(&b.orientation) - 1.0).abs() < 1e-12);
            }

            let tris: Vec<[u32; 3]> = (0..cloud.len().saturating_sub(2)).map(|k| [k as u32, k as u32 + 1, k as u32 + 2]).collect();
            let mesh = TriMesh { vertices: cloud.points.clone(), triangles: tris };
            let p = dir.path().join("m.obj");
            save_mesh(&mesh, &p).unwrap();
            let text = fs::read_to_string(&p).unwrap();
            let back = parse_obj(&text, &p, DegeneratePolicy::WarnAndDrop).unwrap();
            prop_assert_eq!(back.vertices.len(), mesh.vertices.len());
            for (a, b) in mesh.vertices.iter().zip(&back.vertices) {
                prop_assert!((*a - *b).norm() <= 1e-8 * (1.0 + a.norm()));
            }
        }
    }
}
