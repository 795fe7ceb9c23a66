mod common;

use common::{decaying_matrix, frobenius_diff, svd_tail};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treesum_core::id::{interpolative_decomposition, Mat};

#[test]
fn halving_spectrum_within_ten_times_svd() {
    for seed in 0..5 {
        let a = decaying_matrix(50, 30, 0.5, seed);
        let id = interpolative_decomposition(&a, 10).unwrap();
        let residual = frobenius_diff(&a, &id.reconstruct(&a));
        let best = svd_tail(&a, 10);
        assert!(residual <= 10.0 * best, "seed {seed}: {residual:e} vs svd {best:e}");
    }
}

fn low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<f64> = (0..rows * rank).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c: Vec<f64> = (0..rank * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Mat::from_fn(rows, cols, |i, j| (0..rank).map(|t| b[t * rows + i] * c[j * rank + t]).sum())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_at_numerical_rank(rows in 4usize..40, cols in 4usize..40, rank in 1usize..4, seed in any::<u64>()) {
        let a = low_rank(rows, cols, rank, seed);
        let id = interpolative_decomposition(&a, rank).unwrap();
        let rel = frobenius_diff(&a, &id.reconstruct(&a)) / a.frobenius_norm();
        prop_assert!(rel <= 1e-10, "relative residual {rel:e}");
    }

    #[test]
    fn skeleton_and_redundant_split_the_columns(rows in 2usize..30, cols in 2usize..30, seed in any::<u64>(), frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let s = 1 + ((rows.min(cols) - 1) as f64 * frac) as usize;
        let id = interpolative_decomposition(&a, s).unwrap();
        let mut all: Vec<usize> = id.skeleton.iter().chain(&id.redundant).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..cols).collect::<Vec<_>>());
        prop_assert_eq!(id.proj.rows(), s);
        prop_assert_eq!(id.proj.cols(), cols - s);
        // pivoted QR diagonals never increase
        prop_assert!(id.diag.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn residual_shrinks_with_rank(seed in any::<u64>()) {
        let a = decaying_matrix(40, 25, 0.6, seed);
        let mut last = f64::INFINITY;
        for s in [2, 4, 8, 16] {
            let id = interpolative_decomposition(&a, s).unwrap();
            let r = frobenius_diff(&a, &id.reconstruct(&a));
            prop_assert!(r <= 10.0 * svd_tail(&a, s));
            prop_assert!(r < last);
            last = r;
        }
    }
}
