use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::scalar::Real;

/// Eulerian background lattice. Node `(i, j, k)` sits at `origin + (i, j, k)·h`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField<T> {
    pub origin: Vec3<f64>,
    /// Voxel size, mm.
    pub h: f64,
    pub dims: [usize; 3],
    pub mass: Vec<T>,
    /// Momentum during scatter; velocity after `p2g` normalizes it.
    pub velocity: Vec<Vec3<T>>,
}

impl<T: Real> GridField<T> {
    pub fn new(origin: Vec3<f64>, h: f64, dims: [usize; 3]) -> Result<Self> {
        if !(h > 0.0) || dims.iter().any(|&d| d < 4) {
            return Err(Error::InvalidParameter(format!(
                "grid needs h > 0 and >= 4 nodes per axis, got h={h} dims={dims:?}"
            )));
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(GridField { origin, h, dims, mass: vec![T::zero(); n], velocity: vec![Vec3::zero(); n] })
    }

    /// Lattice aligned to multiples of `h` covering `[lo, hi]` plus `margin` nodes
    /// on every side.
    pub fn covering(lo: Vec3<f64>, hi: Vec3<f64>, h: f64, margin: usize) -> Result<Self> {
        let m = margin as f64;
        let mut origin = Vec3::zero();
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let i0 = (lo[a] / h).floor() - m;
            let i1 = (hi[a] / h).ceil() + m;
            origin[a] = i0 * h;
            dims[a] = (i1 - i0) as usize + 1;
        }
        Self::new(origin, h, dims)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn node_coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn node_position(&self, idx: usize) -> Vec3<f64> {
        let [i, j, k] = self.node_coords(idx);
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.h
    }

    pub fn clear(&mut self) {
        self.mass.iter_mut().for_each(|m| *m = T::zero());
        self.velocity.iter_mut().for_each(|v| *v = Vec3::zero());
    }

    pub fn total_mass(&self) -> T {
        self.mass.iter().copied().sum()
    }

    /// Σ mᵢ vᵢ (meaningful once velocities are normalized).
    pub fn total_momentum(&self) -> Vec3<T> {
        let mut p = Vec3::zero();
        for (m, v) in self.mass.iter().zip(&self.velocity) {
            p += *v * *m;
        }
        p
    }

    pub fn upper(&self) -> Vec3<f64> {
        self.origin
            + Vec3::new((self.dims[0] - 1) as f64, (self.dims[1] - 1) as f64, (self.dims[2] - 1) as f64) * self.h
    }

    pub fn lift<U: Real>(&self) -> GridField<U> {
        GridField {
            origin: self.origin,
            h: self.h,
            dims: self.dims,
            mass: self.mass.iter().map(|m| U::lit(m.value())).collect(),
            velocity: self.velocity.iter().map(|v| Vec3::lift(v.value())).collect(),
        }
    }
}

/// Quadratic B-spline stencil of one particle: 3×3×3 nodes starting at `base`.
#[derive(Clone, Copy, Debug)]
pub struct Stencil<T> {
    pub base: [usize; 3],
    /// Per-axis weights for offsets 0, 1, 2.
    pub w: [[T; 3]; 3],
    /// Per-axis node offset from the particle, in mm, for offsets 0, 1, 2.
    pub d: [[T; 3]; 3],
}

impl<T: Real> Stencil<T> {
    /// Fails when the particle is closer than 1.5 voxels to the lattice edge.
    pub fn new(grid: &GridField<T>, x: Vec3<T>) -> Option<Self> {
        let inv_h = T::lit(1.0 / grid.h);
        let mut base = [0usize; 3];
        let mut w = [[T::zero(); 3]; 3];
        let mut d = [[T::zero(); 3]; 3];
        let half = T::lit(0.5);
        for a in 0..3 {
            let g = (x[a] - T::lit(grid.origin[a])) * inv_h;
            let gv = g.value();
            if !(gv >= 1.5 && gv <= (grid.dims[a] - 1) as f64 - 1.5) {
                return None;
            }
            let b = (gv - 0.5).floor();
            let fx = g - T::lit(b);
            base[a] = b as usize;
            let t0 = T::lit(1.5) - fx;
            let t1 = fx - T::one();
            let t2 = fx - half;
            w[a] = [half * t0 * t0, T::lit(0.75) - t1 * t1, half * t2 * t2];
            for (o, dv) in d[a].iter_mut().enumerate() {
                *dv = (T::lit(o as f64) - fx) * T::lit(grid.h);
            }
        }
        Some(Stencil { base, w, d })
    }

    /// Visits the 27 nodes as `(flat index, weight, offset xᵢ - x_p)`.
    #[inline]
    pub fn for_each(&self, grid_dims: [usize; 3], mut f: impl FnMut(usize, T, Vec3<T>)) {
        for k in 0..3 {
            for j in 0..3 {
                let wjk = self.w[1][j] * self.w[2][k];
                let row = ((self.base[2] + k) * grid_dims[1] + self.base[1] + j) * grid_dims[0] + self.base[0];
                for i in 0..3 {
                    let dpos = Vec3::new(self.d[0][i], self.d[1][j], self.d[2][k]);
                    f(row + i, self.w[0][i] * wjk, dpos);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_aligns_nodes_with_multiples_of_h() {
        let g = GridField::<f64>::covering(Vec3::new(-3.0, -3.0, 0.0), Vec3::new(3.0, 3.0, 3.0), 1.2, 3).unwrap();
        for a in 0..3 {
            let r = g.origin[a] / 1.2;
            assert!((r - r.round()).abs() < 1e-12);
        }
        assert!(g.origin.x < -3.0 - 3.0 * 1.2 + 1e-9);
        assert!(g.upper().z >= 3.0 + 3.0 * 1.2 - 1e-9);
        assert_eq!(g.origin.x, -g.upper().x);
    }

    #[test]
    fn stencil_weights_at_a_node() {
        let g = GridField::<f64>::new(Vec3::zero(), 1.0, [10, 10, 10]).unwrap();
        let s = Stencil::new(&g, Vec3::new(4.0, 4.0, 4.0)).unwrap();
        assert_eq!(s.base, [3, 3, 3]);
        for a in 0..3 {
            assert_eq!(s.w[a], [0.125, 0.75, 0.125]);
        }
        let mut total = 0.0;
        let mut centre = 0.0;
        s.for_each(g.dims, |idx, w, _| {
            total += w;
            if idx == g.index(4, 4, 4) {
                centre = w;
            }
        });
        assert_eq!(centre, 0.421875);
        assert!((total - 1.0).abs() < 1e-15);
        assert!(Stencil::new(&g, Vec3::new(1.2, 4.0, 4.0)).is_none());
    }
}
