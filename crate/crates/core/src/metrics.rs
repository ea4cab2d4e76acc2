//! Point-cloud and image error metrics.

use crate::error::{Error, Result};
use crate::geometry::{sample_surface, subsample_cloud, PointCloud, TriMesh};
use crate::image::RgbImage;
use crate::linalg::Vec3;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const DEFAULT_SAMPLES: usize = 2048;
pub const DEFAULT_QUANTILE: f64 = 0.01;
pub const DEFAULT_TAU_MM: f64 = 1.0;
/// Largest size solved exactly by the Hungarian method.
pub const EXACT_EMD_LIMIT: usize = 512;

/// Index of the nearest point of `to` for every point of `from` (lowest index on ties).
pub fn nearest_indices(from: &[Vec3<f64>], to: &[Vec3<f64>]) -> Vec<usize> {
    from.par_iter()
        .map(|p| {
            let mut best = (f64::INFINITY, 0);
            for (j, q) in to.iter().enumerate() {
                let d = (*p - *q).norm_sq();
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect()
}

/// Distance from every point of `from` to its nearest neighbour in `to`.
pub fn nearest_distances(from: &[Vec3<f64>], to: &[Vec3<f64>]) -> Vec<f64> {
    nearest_indices(from, to).into_iter().zip(from).map(|(j, p)| (*p - to[j]).norm()).collect()
}

fn nonempty(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("point cloud"));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean of the `ceil(q·n)` largest values (at least one).
fn top_quantile_mean(mut v: Vec<f64>, q: f64) -> f64 {
    let k = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v.sort_by(|a, b| b.total_cmp(a));
    mean(&v[..k])
}

/// Symmetric mean nearest-neighbour distance (not squared), mm.
pub fn l2_chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    nonempty(a, b)?;
    let ab = nearest_distances(&a.points, &b.points);
    let ba = nearest_distances(&b.points, &a.points);
    Ok(0.5 * (mean(&ab) + mean(&ba)))
}

/// Per direction, the mean of the largest `quantile` fraction of
/// nearest-neighbour distances; averaged over both directions.
pub fn sig_l2_chamfer(a: &PointCloud, b: &PointCloud, quantile: f64) -> Result<f64> {
    nonempty(a, b)?;
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::InvalidParameter(format!("quantile must be in (0, 1], got {quantile}")));
    }
    let ab = nearest_distances(&a.points, &b.points);
    let ba = nearest_distances(&b.points, &a.points);
    Ok(0.5 * (top_quantile_mean(ab, quantile) + top_quantile_mean(ba, quantile)))
}

/// F-score in percent at threshold `tau` (mm, inclusive).
pub fn fscore(a: &PointCloud, b: &PointCloud, tau: f64) -> Result<f64> {
    nonempty(a, b)?;
    let frac = |d: Vec<f64>| d.iter().filter(|&&x| x <= tau).count() as f64 / d.len() as f64;
    let precision = frac(nearest_distances(&a.points, &b.points));
    let recall = frac(nearest_distances(&b.points, &a.points));
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(200.0 * precision * recall / (precision + recall))
}

fn cost_matrix(a: &[Vec3<f64>], b: &[Vec3<f64>]) -> Vec<f64> {
    a.par_iter().flat_map_iter(|p| b.iter().map(move |q| (*p - *q).norm())).collect()
}

/// Minimum-cost perfect assignment for a square `n × n` cost matrix
/// (shortest augmenting paths with potentials). Returns `assign[row] = col`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based arrays; column 0 is the virtual start.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Gauss–Seidel auction with ε-scaling. The result costs at most
/// `opt + n·ε_final`; ε_final is chosen as 1% of a lower bound on the optimum
/// (sum of row minima) divided by n, so the relative gap is at most 1%.
pub fn auction(cost: &[f64], n: usize) -> Vec<usize> {
    let lower: f64 = (0..n).map(|i| cost[i * n..(i + 1) * n].iter().copied().fold(f64::INFINITY, f64::min)).sum();
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let eps_final = (0.01 * lower / n as f64).max(1e-12 * max_cost.max(1.0));
    let mut eps = (max_cost / 4.0).max(eps_final);
    let mut price = vec![0.0; n];
    let mut owner = vec![usize::MAX; n];
    let mut assign = vec![usize::MAX; n];
    loop {
        owner.iter_mut().for_each(|o| *o = usize::MAX);
        assign.iter_mut().for_each(|a| *a = usize::MAX);
        let mut queue: std::collections::VecDeque<usize> = (0..n).collect();
        while let Some(i) = queue.pop_front() {
            let row = &cost[i * n..(i + 1) * n];
            // Benefit is −cost − price; find the best and second-best objects.
            let (mut best, mut best_j, mut second) = (f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
            for j in 0..n {
                let val = -row[j] - price[j];
                if val > best {
                    second = best;
                    best = val;
                    best_j = j;
                } else if val > second {
                    second = val;
                }
            }
            let incr = if second.is_finite() { best - second + eps } else { eps };
            price[best_j] += incr;
            let prev = owner[best_j];
            owner[best_j] = i;
            assign[i] = best_j;
            if prev != usize::MAX {
                assign[prev] = usize::MAX;
                queue.push_back(prev);
            }
        }
        if eps <= eps_final {
            break;
        }
        eps = (eps / 5.0).max(eps_final);
    }
    assign
}

/// Earth mover's distance per point (mm) for equal-size clouds.
pub fn emd(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    nonempty(a, b)?;
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    let n = a.len();
    let cost = cost_matrix(&a.points, &b.points);
    let assign = if n <= EXACT_EMD_LIMIT { hungarian(&cost, n) } else { auction(&cost, n) };
    Ok(assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>() / n as f64)
}

/// Column order and labels follow the usual cloud-metric tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudMetricsReport {
    pub l2_cd: f64,
    pub sig_l2_cd: f64,
    pub emd: f64,
    pub fscore_1mm: f64,
    pub n_sampled: usize,
}

impl CloudMetricsReport {
    pub const LABELS: [&'static str; 4] = ["L2 CD", "Sig. L2 CD", "EMD", "F-Score"];

    pub fn values(&self) -> [f64; 4] {
        [self.l2_cd, self.sig_l2_cd, self.emd, self.fscore_1mm]
    }
}

/// Either side of a cloud comparison.
#[derive(Clone, Copy, Debug)]
pub enum Shape<'a> {
    Cloud(&'a PointCloud),
    Mesh(&'a TriMesh),
}

impl Shape<'_> {
    fn sample(&self, n: usize, seed: u64) -> Result<PointCloud> {
        match self {
            Shape::Cloud(c) => subsample_cloud(c, n, seed),
            Shape::Mesh(m) => sample_surface(m, n, seed),
        }
    }
}

/// Samples `n` points from each side with the same seed and evaluates all four metrics.
pub fn cloud_metrics(pred: Shape, gt: Shape, n: usize, seed: u64) -> Result<CloudMetricsReport> {
    let a = pred.sample(n, seed)?;
    let b = gt.sample(n, seed)?;
    Ok(CloudMetricsReport {
        l2_cd: l2_chamfer(&a, &b)?,
        sig_l2_cd: sig_l2_chamfer(&a, &b, DEFAULT_QUANTILE)?,
        emd: emd(&a, &b)?,
        fscore_1mm: fscore(&a, &b, DEFAULT_TAU_MM)?,
        n_sampled: n,
    })
}

/// PSNR in dB; identical images give `+∞`, serialized as the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Psnr(pub f64);

impl Psnr {
    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Psnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Psnr(x)),
            Raw::Str(s) if s == "inf" => Ok(Psnr(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("invalid PSNR value {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMetricsReport {
    pub mean_l2: f64,
    pub sig_l2: f64,
    pub psnr: Psnr,
}

/// `10·log10(1/MSE)`; `+∞` when the MSE is zero.
pub fn psnr_from_mse(mse: f64) -> Psnr {
    if mse == 0.0 {
        Psnr(f64::INFINITY)
    } else {
        Psnr(10.0 * (1.0 / mse).log10())
    }
}

pub fn image_metrics(pred: &RgbImage, gt: &RgbImage, quantile: f64) -> Result<ImageMetricsReport> {
    pred.same_shape(gt)?;
    if pred.data.is_empty() {
        return Err(Error::Empty("image"));
    }
    for img in [pred, gt] {
        if img.data.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidParameter("image values must lie in [0, 1]".into()));
        }
    }
    let mut sq_sum = 0.0;
    let norms: Vec<f64> = pred
        .data
        .iter()
        .zip(&gt.data)
        .map(|(a, b)| {
            let s: f64 = (0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum();
            sq_sum += s;
            s.sqrt()
        })
        .collect();
    let mse = sq_sum / (3 * norms.len()) as f64;
    Ok(ImageMetricsReport {
        mean_l2: mean(&norms),
        sig_l2: top_quantile_mean(norms, quantile),
        psnr: psnr_from_mse(mse),
    })
}
