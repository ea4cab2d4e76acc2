use super::{PointCloud, TriMesh};
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Area-weighted uniform surface sampling; deterministic given `seed`.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if mesh.is_empty() {
        return Err(Error::Empty("mesh"));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut acc = 0.0;
    for k in 0..mesh.triangles.len() {
        acc += mesh.triangle_area(k);
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let r = rng.gen::<f64>() * acc;
            let k = cdf.partition_point(|c| *c <= r).min(cdf.len() - 1);
            let [a, b, c] = mesh.corners(k);
            let s = rng.gen::<f64>().sqrt();
            let t = rng.gen::<f64>();
            a * (1.0 - s) + b * (s * (1.0 - t)) + c * (s * t)
        })
        .collect();
    Ok(PointCloud::new(points))
}

/// Exactly `n` points: a random subset, or with replacement when the cloud is smaller.
pub fn subsample_cloud(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::Empty("point cloud"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec3<f64>> = if cloud.len() >= n {
        let mut idx = index::sample(&mut rng, cloud.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| cloud.points[i]).collect()
    } else {
        (0..n).map(|_| cloud.points[rng.gen_range(0..cloud.len())]).collect()
    };
    Ok(PointCloud::new(points))
}
