//! Fixtures shared by the criterion benches.

use treesum_core::dataset::{generate_manifold_dataset, median_pairwise_distance, normal_weights, Embedding};
use treesum_core::id::Mat;
use treesum_core::{KernelSpec, PointSet, WeightVector};

pub struct Fixture {
    pub points: PointSet,
    pub weights: WeightVector,
    pub kernel: KernelSpec,
}

/// Points on a 4-dimensional manifold with a median-distance Gaussian.
pub fn manifold_fixture(n: usize, d: usize, seed: u64) -> Fixture {
    let points = generate_manifold_dataset(n, d, 4, 0.0, Embedding::Nonlinear, seed).expect("dataset");
    let sigma = median_pairwise_distance(&points, 1000, seed).expect("sigma");
    Fixture {
        weights: normal_weights(n, seed + 1),
        kernel: KernelSpec::gaussian(sigma).expect("kernel"),
        points,
    }
}

/// `rows x cols` matrix with singular values decaying by `ratio`.
pub fn decaying_matrix(rows: usize, cols: usize, ratio: f64) -> Mat {
    let mut a = Mat::zeros(rows, cols);
    let rank = rows.min(cols);
    for r in 0..rank {
        let sv = ratio.powi(r as i32);
        for i in 0..rows {
            let u = ((i * (r + 1)) as f64 * 0.37 + r as f64).sin();
            for j in 0..cols {
                let v = ((j * (r + 2)) as f64 * 0.53 + 1.0).cos();
                a.set(i, j, a.get(i, j) + sv * u * v);
            }
        }
    }
    a
}
