//! Synthetic datasets and sampling helpers.

use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, PointSet, WeightVector};
use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;

/// Map from the latent cube `[0,1]^q` into `R^d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Embedding {
    /// `y = G z + sin(pi H z + phi)` coordinatewise, with Gaussian `G`, `H`
    /// and uniform phases.
    #[default]
    Nonlinear,
    /// `y = G z`.
    Linear,
    /// `y = z`; needs `q == d`.
    Identity,
}

impl FromStr for Embedding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonlinear" => Ok(Embedding::Nonlinear),
            "linear" => Ok(Embedding::Linear),
            "identity" => Ok(Embedding::Identity),
            other => Err(Error::Parse(format!("unknown embedding '{other}'"))),
        }
    }
}

/// `n` points on a `d_intrinsic`-dimensional manifold in `R^d_ambient`,
/// plus isotropic Gaussian noise with standard deviation `noise`.
pub fn generate_manifold_dataset(
    n: usize,
    d_ambient: usize,
    d_intrinsic: usize,
    noise: f64,
    embedding: Embedding,
    rng_seed: u64,
) -> Result<PointSet> {
    if n == 0 || d_ambient == 0 || d_intrinsic == 0 {
        return invalid("n and both dimensions must be positive");
    }
    if d_intrinsic > d_ambient {
        return invalid(format!(
            "intrinsic dimension {d_intrinsic} exceeds ambient {d_ambient}"
        ));
    }
    if embedding == Embedding::Identity && d_intrinsic != d_ambient {
        return invalid("identity embedding needs equal dimensions");
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return invalid(format!("noise must be >= 0, got {noise}"));
    }
    let (d, q) = (d_ambient, d_intrinsic);

    let mut map_rng = stream_rng(rng_seed, 0);
    let scale = 1.0 / (q as f64).sqrt();
    let g: Vec<f64> = (0..d * q)
        .map(|_| map_rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    let h: Vec<f64> = (0..d * q)
        .map(|_| map_rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    let phase: Vec<f64> = (0..d)
        .map(|_| map_rng.random::<f64>() * std::f64::consts::TAU)
        .collect();

    let mut latent_rng = stream_rng(rng_seed, 1);
    let mut noise_rng = stream_rng(rng_seed, 2);
    let mut data = Vec::with_capacity(n * d);
    let mut z = vec![0.0; q];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = latent_rng.random::<f64>();
        }
        for k in 0..d {
            let mut y = match embedding {
                Embedding::Identity => z[k],
                Embedding::Linear => dot_row(&g[k * q..(k + 1) * q], &z),
                Embedding::Nonlinear => {
                    let lin = dot_row(&g[k * q..(k + 1) * q], &z);
                    let arg = std::f64::consts::PI * dot_row(&h[k * q..(k + 1) * q], &z) + phase[k];
                    lin + arg.sin()
                }
            };
            if noise > 0.0 {
                y += noise * noise_rng.sample::<f64, _>(StandardNormal);
            }
            data.push(y);
        }
    }
    PointSet::new(data, d)
}

fn dot_row(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Points uniform in `[0,1]^d`.
pub fn uniform_cube(n: usize, d: usize, rng_seed: u64) -> Result<PointSet> {
    let mut rng = stream_rng(rng_seed, 0);
    PointSet::new((0..n * d).map(|_| rng.random::<f64>()).collect(), d)
}

/// Mixture of `clusters` isotropic Gaussians with unit spread and centers
/// drawn from `N(0, center_scale^2)` per coordinate.
pub fn gaussian_mixture(
    n: usize,
    d: usize,
    clusters: usize,
    center_scale: f64,
    rng_seed: u64,
) -> Result<PointSet> {
    if clusters == 0 {
        return invalid("need at least one cluster");
    }
    let mut rng = stream_rng(rng_seed, 0);
    let centers: Vec<f64> = (0..clusters * d)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * center_scale)
        .collect();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = rng.random_range(0..clusters);
        for k in 0..d {
            data.push(centers[c * d + k] + rng.sample::<f64, _>(StandardNormal));
        }
    }
    PointSet::new(data, d)
}

/// Median Euclidean distance over all pairs of a uniform subsample of at
/// most `sample` points.
pub fn median_pairwise_distance(points: &PointSet, sample: usize, rng_seed: u64) -> Result<f64> {
    let n = points.len();
    let m = sample.min(n);
    if m < 2 {
        return invalid("need at least two points for a pairwise distance");
    }
    let mut rng = stream_rng(rng_seed, 0);
    let mut idx = index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..m {
        for &b in &idx[a + 1..] {
            dists.push(sq_dist(points.row(idx[a]), points.row(b)).sqrt());
        }
    }
    let mid = dists.len() / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    Ok(*median)
}

/// Standard normal weights.
pub fn normal_weights(n: usize, rng_seed: u64) -> WeightVector {
    let mut rng = stream_rng(rng_seed, 0);
    WeightVector::new((0..n).map(|_| rng.sample(StandardNormal)).collect())
        .expect("normal samples are finite")
}

/// Bandwidths log-uniform in `[lo, hi]`.
pub fn log_uniform_bandwidths(n: usize, lo: f64, hi: f64, rng_seed: u64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return invalid(format!("bad bandwidth range [{lo}, {hi}]"));
    }
    let mut rng = stream_rng(rng_seed, 0);
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|_| (a + (b - a) * rng.random::<f64>()).exp()).collect())
}

/// `count` distinct indices below `n`, drawn uniformly and sorted; all of
/// `0..n` when `count >= n`.
pub fn sample_indices(n: usize, count: usize, rng_seed: u64) -> Vec<usize> {
    if count >= n {
        return (0..n).collect();
    }
    let mut rng = stream_rng(rng_seed, 0);
    let mut v = index::sample(&mut rng, n, count).into_vec();
    v.sort_unstable();
    v
}

/// Adds Gaussian noise; used by tests to perturb datasets.
pub fn jitter(points: &PointSet, scale: f64, rng_seed: u64) -> Result<PointSet> {
    let mut rng = stream_rng(rng_seed, 0);
    let normal = Normal::new(0.0, scale).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    PointSet::new(
        points.as_slice().iter().map(|v| v + normal.sample(&mut rng)).collect(),
        points.dim(),
    )
}
