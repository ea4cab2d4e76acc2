//! Binary particle snapshots: `MPMS`, u32 version, u64 count, then
//! little-endian f64 arrays x, v, F, C, m, V0, flags (0.0 / 1.0).

use super::particles::ParticleSet;
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"MPMS";
pub const VERSION: u32 = 1;

pub fn write_particles<W: Write>(p: &ParticleSet<f64>, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(p.len() as u64).to_le_bytes())?;
    let mut put = |v: f64| w.write_all(&v.to_le_bytes());
    for x in &p.x {
        x.to_array().into_iter().try_for_each(&mut put)?;
    }
    for v in &p.v {
        v.to_array().into_iter().try_for_each(&mut put)?;
    }
    for f in p.f.iter().chain(&p.c) {
        f.m.iter().flatten().copied().try_for_each(&mut put)?;
    }
    p.mass.iter().copied().try_for_each(&mut put)?;
    p.vol0.iter().copied().try_for_each(&mut put)?;
    p.surface.iter().map(|&s| if s { 1.0 } else { 0.0 }).try_for_each(&mut put)?;
    Ok(())
}

pub fn read_particles<R: Read>(mut r: R) -> Result<ParticleSet<f64>> {
    let io = |e: std::io::Error| Error::Format(format!("truncated particle dump: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an MPMS particle dump".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(io)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported MPMS version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(io)?;
    let n = u64::from_le_bytes(b8) as usize;
    let mut take = |count: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b8).map_err(io)?;
            out.push(f64::from_le_bytes(b8));
        }
        Ok(out)
    };
    let vec3s = |d: Vec<f64>| -> Vec<Vec3<f64>> { d.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect() };
    let mat3s = |d: Vec<f64>| -> Vec<Mat3<f64>> {
        d.chunks(9).map(|c| Mat3::from_rows([[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]])).collect()
    };
    let x = vec3s(take(3 * n)?);
    let v = vec3s(take(3 * n)?);
    let f = mat3s(take(9 * n)?);
    let c = mat3s(take(9 * n)?);
    let mass = take(n)?;
    let vol0 = take(n)?;
    let surface = take(n)?.into_iter().map(|s| s != 0.0).collect();
    Ok(ParticleSet { x, v, f, c, mass, vol0, surface })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_roundtrip_is_exact() {
        let mut p = ParticleSet::new(
            vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-0.5, 0.25, 1e-9)],
            vec![1e-6, 2e-6],
            vec![0.216, 0.216],
            vec![true, false],
        )
        .unwrap();
        p.v[1] = Vec3::new(0.1, -0.2, 0.3);
        p.f[0] = Mat3::from_rows([[1.0, 0.1, 0.2], [0.0, 1.1, 0.0], [0.3, 0.0, 0.9]]);
        p.c[1].m[2][1] = 4.5;
        let mut buf = Vec::new();
        write_particles(&p, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"MPMS");
        assert_eq!(buf.len(), 16 + 8 * 2 * (3 + 3 + 9 + 9 + 3));
        assert_eq!(read_particles(&buf[..]).unwrap(), p);
        assert!(read_particles(&buf[..20]).is_err());
    }
}
