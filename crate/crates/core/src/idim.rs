//! Maximum-likelihood intrinsic-dimension estimation from k-NN distances,
//! plus seeded point-cloud generators with known dimension.
//!
//! For a point `x` with sorted neighbor distances `T_1 <= ... <= T_k`,
//!
//! ```text
//! m_k(x) = [ 1/(k-1) * sum_{j=1}^{k-1} ln(T_k / T_j) ]^-1
//! ```
//!
//! `per_k[k]` averages `m_k(x)` over points and the global estimate averages
//! `per_k` over `k_min..=k_max`.

use std::collections::{BTreeMap, HashSet};

use nalgebra::DMatrix;
use rand::distr::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// `N x D` samples, one point per row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCloud {
    count: usize,
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(count: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if count < 2 {
            return Err(Error::domain(format!("a point cloud needs at least 2 points, got {count}")));
        }
        if dim < 1 {
            return Err(Error::domain("a point cloud needs dimension >= 1"));
        }
        if data.len() != count * dim {
            return Err(Error::domain(format!(
                "expected {} values for {count} points in {dim} dimensions, got {}",
                count * dim,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite value at point {}, coordinate {}",
                i / dim,
                i % dim
            )));
        }
        Ok(Self { count, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::domain(format!(
                "row {i} has {} values, expected {dim}",
                rows[i].len()
            )));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = self.rows().map(f).collect();
        Self::from_rows(&rows)
    }

    /// Drops exact duplicate rows, keeping first occurrences in order.
    /// Returns the deduplicated cloud (or an error if fewer than 2 points
    /// remain) and the number of rows removed.
    pub fn dedup(&self) -> Result<(Self, usize)> {
        let mut seen = HashSet::with_capacity(self.count);
        let mut data = Vec::with_capacity(self.data.len());
        let mut kept = 0;
        for row in self.rows() {
            // +0.0 folds -0.0 onto 0.0 so both compare equal.
            let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
            if seen.insert(key) {
                data.extend_from_slice(row);
                kept += 1;
            }
        }
        if kept < 2 {
            return Err(Error::domain(format!(
                "only {kept} distinct point(s) remain after merging duplicates"
            )));
        }
        Ok((Self::new(kept, self.dim, data)?, self.count - kept))
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sorted neighbor distances for every point, `k` per row.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnTable {
    pub k: usize,
    pub distances: Vec<f64>,
    pub indices: Vec<usize>,
}

impl KnnTable {
    pub fn distances_of(&self, point: usize) -> &[f64] {
        &self.distances[point * self.k..(point + 1) * self.k]
    }

    pub fn neighbors_of(&self, point: usize) -> &[usize] {
        &self.indices[point * self.k..(point + 1) * self.k]
    }
}

/// Exact brute-force k nearest neighbors (self excluded). Ties are broken by
/// the neighbor's index.
pub fn knn_distances(cloud: &PointCloud, k_max: usize) -> Result<KnnTable> {
    let n = cloud.count();
    if k_max == 0 || k_max > n - 1 {
        return Err(Error::domain(format!(
            "k_max = {k_max} must lie in [1, {}] for {n} points",
            n - 1
        )));
    }
    let rows: Vec<(Vec<f64>, Vec<usize>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = cloud.row(i);
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (euclidean(q, cloud.row(j)), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k_max < cand.len() {
                cand.select_nth_unstable_by(k_max - 1, cmp);
                cand.truncate(k_max);
            }
            cand.sort_unstable_by(cmp);
            cand.into_iter().unzip()
        })
        .collect();
    let mut distances = Vec::with_capacity(n * k_max);
    let mut indices = Vec::with_capacity(n * k_max);
    for (d, ix) in rows {
        distances.extend(d);
        indices.extend(ix);
    }
    Ok(KnnTable {
        k: k_max,
        distances,
        indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IdimConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Average inverse per-point estimates before inverting (the
    /// MacKay-Ghahramani correction) instead of averaging the estimates.
    pub inverse_average: bool,
    /// Keep the per-point estimate (averaged over k) in the result.
    pub per_point: bool,
}

impl Default for IdimConfig {
    fn default() -> Self {
        Self {
            k_min: 10,
            k_max: 20,
            inverse_average: false,
            per_point: false,
        }
    }
}

impl IdimConfig {
    pub fn with_range(k_min: usize, k_max: usize) -> Self {
        Self {
            k_min,
            k_max,
            ..Self::default()
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k_min < 2 || self.k_min > self.k_max || self.k_max > n.saturating_sub(1) {
            return Err(Error::domain(format!(
                "need 2 <= k_min <= k_max <= N - 1, got k_min = {}, k_max = {}, N = {n}",
                self.k_min, self.k_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdimEstimate {
    pub global_value: f64,
    pub per_k: BTreeMap<usize, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_point: Option<Vec<f64>>,
    /// Duplicate rows merged before estimation.
    pub merged_duplicates: usize,
    pub points_used: usize,
}

/// Inverse of `m_k(x)`: the mean log-ratio `1/(k-1) sum ln(T_k / T_j)`.
fn inverse_point_estimate(t: &[f64], k: usize) -> f64 {
    let tk = t[k - 1];
    let s: f64 = t[..k - 1].iter().map(|&tj| (tk / tj).ln()).sum();
    s / (k - 1) as f64
}

pub fn mle_intrinsic_dimension(cloud: &PointCloud, config: &IdimConfig) -> Result<IdimEstimate> {
    let (cloud, merged) = cloud.dedup()?;
    let n = cloud.count();
    config.validate(n)?;
    let knn = knn_distances(&cloud, config.k_max)?;

    if let Some(i) = (0..n).find(|&i| knn.distances_of(i)[0] <= 0.0) {
        return Err(Error::domain(format!("point {i} has a zero neighbor distance")));
    }

    // inv[k - k_min][x] = mean log-ratio for point x at neighborhood size k.
    let ks: Vec<usize> = (config.k_min..=config.k_max).collect();
    let mut inv = vec![vec![0.0; n]; ks.len()];
    for (row, &k) in inv.iter_mut().zip(&ks) {
        for (x, slot) in row.iter_mut().enumerate() {
            let v = inverse_point_estimate(knn.distances_of(x), k);
            if !(v > 0.0) {
                return Err(Error::domain(format!(
                    "point {x}: its {k} nearest neighbors are equidistant, so the estimate is unbounded"
                )));
            }
            *slot = v;
        }
    }

    let nf = n as f64;
    let mut per_k = BTreeMap::new();
    for (row, &k) in inv.iter().zip(&ks) {
        let value = if config.inverse_average {
            nf / row.iter().sum::<f64>()
        } else {
            row.iter().map(|v| 1.0 / v).sum::<f64>() / nf
        };
        per_k.insert(k, value);
    }
    let global_value = per_k.values().sum::<f64>() / ks.len() as f64;

    let per_point = config.per_point.then(|| {
        (0..n)
            .map(|x| inv.iter().map(|row| 1.0 / row[x]).sum::<f64>() / ks.len() as f64)
            .collect()
    });

    Ok(IdimEstimate {
        global_value,
        per_k,
        per_point,
        merged_duplicates: merged,
        points_used: n,
    })
}

/// Independent RNG stream for item `index` under `seed`, so results do not
/// depend on how work is split across threads.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Writes one point drawn uniformly from the unit `p`-ball into `out`.
pub fn sample_unit_ball(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let p = out.len();
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = z;
            norm2 += z * z;
        }
        if norm2 > 0.0 {
            let u: f64 = Open01.sample(rng);
            let r = u.powf(1.0 / p as f64);
            let scale = r / norm2.sqrt();
            out.iter_mut().for_each(|v| *v *= scale);
            return;
        }
    }
}

/// `n_points` samples uniform in the unit `p`-ball: a normalized Gaussian
/// direction scaled by `U^(1/p)`.
///
/// Point `i` is drawn from its own stream, see [`stream_rng`]. A cloud needs
/// at least two points; single draws go through [`sample_unit_ball`].
pub fn generate_uniform_ball(n_points: usize, p: usize, seed: u64) -> Result<PointCloud> {
    if p < 1 {
        return Err(Error::domain("ball dimension p must be at least 1"));
    }
    let mut data = vec![0.0; n_points * p];
    data.par_chunks_mut(p).enumerate().for_each(|(i, row)| {
        let mut rng = stream_rng(seed, i as u64);
        sample_unit_ball(&mut rng, row);
    });
    PointCloud::new(n_points, p, data)
}

/// Haar-distributed `d x d` orthogonal matrix.
pub fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, u64::MAX);
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Uniform samples from the `intrinsic_p`-cube, zero-padded to `ambient_d`
/// coordinates and, when `rotate` is set, mapped through a seeded random
/// orthogonal transform.
pub fn generate_embedded_cube(
    n_points: usize,
    intrinsic_p: usize,
    ambient_d: usize,
    seed: u64,
    rotate: bool,
) -> Result<PointCloud> {
    if intrinsic_p < 1 || intrinsic_p > ambient_d {
        return Err(Error::domain(format!(
            "need 1 <= intrinsic_p <= ambient_d, got {intrinsic_p} and {ambient_d}"
        )));
    }
    let mut data = vec![0.0; n_points * ambient_d];
    data.par_chunks_mut(ambient_d).enumerate().for_each(|(i, row)| {
        let mut rng = stream_rng(seed, i as u64);
        for v in row.iter_mut().take(intrinsic_p) {
            *v = Open01.sample(&mut rng);
        }
    });
    if rotate {
        let q = random_orthogonal(ambient_d, seed);
        data.par_chunks_mut(ambient_d).for_each(|row| {
            let x = nalgebra::DVector::from_column_slice(row);
            let y = &q * x;
            row.copy_from_slice(y.as_slice());
        });
    }
    PointCloud::new(n_points, ambient_d, data)
}
