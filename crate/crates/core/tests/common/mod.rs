#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treesum_core::id::Mat;
use treesum_core::{
    build_all_skeletons, knn_exact, knn_greedy, KernelSpec, KnnGraph, PointSet, SkeletonConfig, SkeletonSet,
    SpaceTree, SplitRule, Treecode, WeightVector,
};

pub struct Built {
    pub knn: KnnGraph,
    pub tree: SpaceTree,
    pub skeletons: SkeletonSet,
}

impl Built {
    pub fn treecode<'a>(&'a self, points: &'a PointSet, weights: &'a WeightVector, kernel: &'a KernelSpec) -> Treecode<'a> {
        Treecode {
            points,
            weights,
            kernel,
            tree: &self.tree,
            knn: &self.knn,
            skeletons: &self.skeletons,
        }
    }
}

pub struct Setup {
    pub k: usize,
    pub exact_knn: bool,
    pub leaf: usize,
    pub rank: usize,
    pub uniform: usize,
    pub min_level: Option<usize>,
    pub seed: u64,
}

impl Setup {
    pub fn new(k: usize, leaf: usize, rank: usize, seed: u64) -> Self {
        Self {
            k,
            exact_knn: false,
            leaf,
            rank,
            uniform: rank,
            min_level: None,
            seed,
        }
    }

    pub fn build(&self, points: &PointSet, weights: &WeightVector, kernel: &KernelSpec) -> Built {
        let knn = if self.exact_knn {
            knn_exact(points, self.k).unwrap()
        } else {
            knn_greedy(points, self.k, 8, 64, self.seed).unwrap()
        };
        let tree = SpaceTree::build(points, self.leaf, SplitRule::MedianProjection, self.seed + 1).unwrap();
        let mut cfg = SkeletonConfig::new(self.rank, self.uniform, self.seed + 2);
        cfg.min_skeleton_level = self.min_level;
        let skeletons = build_all_skeletons(&tree, &knn, kernel, points, weights, &cfg).unwrap();
        Built { knn, tree, skeletons }
    }
}

pub fn to_dmatrix(a: &Mat) -> DMatrix<f64> {
    DMatrix::from_column_slice(a.rows(), a.cols(), a.as_slice())
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Mat {
    Mat::from_col_major(m.nrows(), m.ncols(), m.as_slice().to_vec())
}

fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    g.qr().q().columns(0, cols).into_owned()
}

/// `U diag(ratio^i) V^T` with random orthonormal `U`, `V`.
pub fn decaying_matrix(rows: usize, cols: usize, ratio: f64, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rows.min(cols);
    let u = random_orthonormal(rows, r, &mut rng);
    let v = random_orthonormal(cols, r, &mut rng);
    let sv = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(r, |i, _| ratio.powi(i as i32)));
    from_dmatrix(&(u * sv * v.transpose()))
}

/// Frobenius residual of the best rank-`s` approximation.
pub fn svd_tail(a: &Mat, s: usize) -> f64 {
    let sv = to_dmatrix(a).singular_values();
    let mut sorted: Vec<f64> = sv.iter().copied().collect();
    sorted.sort_by(|x, y| y.total_cmp(x));
    sorted[s..].iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn frobenius_diff(a: &Mat, b: &Mat) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn ones(n: usize) -> WeightVector {
    WeightVector::new(vec![1.0; n]).unwrap()
}
