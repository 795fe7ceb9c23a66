use proptest::prelude::*;
use treesum_core::ann::{build_rp_tree, recall};
use treesum_core::dataset::{gaussian_mixture, uniform_cube};
use treesum_core::{knn_exact, knn_greedy};

#[test]
fn blob_recall_with_eight_trees() {
    let pts = gaussian_mixture(2000, 16, 1, 0.0, 11).unwrap();
    let exact = knn_exact(&pts, 10).unwrap();
    let approx = knn_greedy(&pts, 10, 8, 128, 12).unwrap();
    let r = recall(&approx, &exact).unwrap();
    assert!(r >= 0.8, "recall {r}");
}

#[test]
fn mean_recall_grows_with_trees() {
    let pts = gaussian_mixture(1500, 12, 4, 3.0, 21).unwrap();
    let exact = knn_exact(&pts, 8).unwrap();
    let mut means = Vec::new();
    for trees in [1, 2, 4, 8] {
        let total: f64 = (0..10)
            .map(|seed| recall(&knn_greedy(&pts, 8, trees, 64, seed).unwrap(), &exact).unwrap())
            .sum();
        means.push(total / 10.0);
    }
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
    assert!(means[3] > means[0]);
}

#[test]
fn rp_tree_leaves_partition_the_points() {
    let pts = uniform_cube(1000, 5, 3).unwrap();
    let tree = build_rp_tree(&pts, 32, 4).unwrap();
    let mut seen: Vec<usize> = tree.leaves().flatten().copied().collect();
    assert!(tree.leaves().all(|l| !l.is_empty() && l.len() <= 32));
    seen.sort_unstable();
    assert_eq!(seen, (0..1000).collect::<Vec<_>>());
    for i in (0..1000).step_by(37) {
        assert!(tree.route(pts.row(i)).contains(&i));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_distances_dominate(n in 12usize..150, d in 1usize..6, k in 1usize..10, trees in 1usize..4, seed in any::<u64>()) {
        let pts = uniform_cube(n, d, seed).unwrap();
        let exact = knn_exact(&pts, k).unwrap();
        let approx = knn_greedy(&pts, k, trees, 8, seed ^ 1).unwrap();
        approx.validate(&pts, 1e-12).unwrap();
        for i in 0..n {
            for (e, a) in exact.distances(i).iter().zip(approx.distances(i)) {
                prop_assert!(e <= a);
            }
        }
        prop_assert_eq!(knn_greedy(&pts, k, trees, 8, seed ^ 1).unwrap(), approx);
    }
}
