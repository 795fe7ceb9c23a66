//! Far-field compression of tree nodes.
//!
//! Every compressible node is represented by a few of its own source points
//! (its skeleton) carrying folded weights. The skeleton is chosen by an
//! interpolative decomposition of the kernel block between sampled far
//! targets and the node's candidate sources. Targets are sampled from the
//! candidates' nearest neighbors outside the node, padded with uniform draws
//! from outside the node. Leaves use their own points as candidates; an
//! internal node uses the union of its children's skeletons, so the
//! construction runs bottom-up.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann::KnnGraph;
use crate::data::{PointSet, WeightVector};
use crate::error::{invalid, Result};
use crate::id::{interpolative_decomposition, Mat};
use crate::kernel::KernelSpec;
use crate::rng::stream_rng;
use crate::spacetree::{NodeId, SpaceTree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonConfig {
    /// Skeleton size `s`, fixed for every node.
    pub rank: usize,
    /// Uniformly drawn far targets added to every sample design.
    pub uniform_samples: usize,
    /// Cap on nearest-neighbor sample rows; `None` means `4 * rank`.
    pub max_neighbor_rows: Option<usize>,
    /// Nodes with `level < min_skeleton_level` are never compressed.
    /// `None` excludes the nodes owning more than half of the points.
    pub min_skeleton_level: Option<usize>,
    pub seed: u64,
}

impl SkeletonConfig {
    pub fn new(rank: usize, uniform_samples: usize, seed: u64) -> Self {
        Self {
            rank,
            uniform_samples,
            max_neighbor_rows: None,
            min_skeleton_level: None,
            seed,
        }
    }

    fn neighbor_cap(&self) -> usize {
        self.max_neighbor_rows.unwrap_or(4 * self.rank)
    }
}

/// Sampled far-field targets for one node, sorted and duplicate free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleDesign {
    pub node: NodeId,
    pub rows: Vec<usize>,
}

impl SampleDesign {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

/// Builds the sample rows of `node` from the neighbors of `candidates`.
///
/// Neighbor rows beyond `max_neighbor_rows` are subsampled uniformly.
/// The uniform draws are taken without replacement from all points outside
/// the node. The design is empty when nothing lies outside the node.
pub fn build_sample_design(
    node: NodeId,
    tree: &SpaceTree,
    knn: &KnnGraph,
    candidates: &[usize],
    uniform_samples: usize,
    max_neighbor_rows: usize,
    rng_seed: u64,
) -> SampleDesign {
    let mut rng = stream_rng(rng_seed, node as u64);
    let mut rows: Vec<usize> = candidates
        .iter()
        .flat_map(|&c| knn.neighbors(c).iter().copied())
        .filter(|&j| !tree.node_owns(node, j))
        .collect();
    rows.sort_unstable();
    rows.dedup();
    if rows.len() > max_neighbor_rows {
        let keep = index::sample(&mut rng, rows.len(), max_neighbor_rows);
        let mut kept: Vec<usize> = keep.into_iter().map(|i| rows[i]).collect();
        kept.sort_unstable();
        rows = kept;
    }

    let owned = tree.node(node);
    let outside = tree.num_points() - owned.len();
    let draws = uniform_samples.min(outside);
    if draws > 0 {
        let perm = tree.permutation();
        for p in index::sample(&mut rng, outside, draws) {
            let pos = if p < owned.begin { p } else { p + owned.len() };
            rows.push(perm[pos]);
        }
        rows.sort_unstable();
        rows.dedup();
    }
    SampleDesign { node, rows }
}

/// Skeleton of one node.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub node: NodeId,
    /// Original indices of the skeleton points, in pivot order.
    pub indices: Vec<usize>,
    /// Original indices of the other candidates, in pivot order; column
    /// `t` of `proj` belongs to `redundant[t]`.
    pub redundant: Vec<usize>,
    pub proj: Mat,
    pub effective_weights: Vec<f64>,
    /// Numerical rank found by the decomposition (`<= indices.len()`).
    pub rank: usize,
    pub sample_rows: usize,
}

impl Skeleton {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn candidates(&self) -> usize {
        self.indices.len() + self.redundant.len()
    }

    /// `sum_t K(x, x_skel[t]) * effective_weights[t]`.
    #[inline]
    pub fn potential(&self, kernel: &KernelSpec, points: &PointSet, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.effective_weights)
            .map(|(&j, &w)| kernel.eval_unchecked(x, points.row(j), j) * w)
            .sum()
    }
}

/// Dense kernel block `A[r, c] = K(x_rows[r], x_cols[c])`.
pub fn kernel_block(kernel: &KernelSpec, points: &PointSet, rows: &[usize], cols: &[usize]) -> Mat {
    let mut data = Vec::with_capacity(rows.len() * cols.len());
    for &j in cols {
        let src = points.row(j);
        data.extend(rows.iter().map(|&r| kernel.eval_unchecked(points.row(r), src, j)));
    }
    Mat::from_col_major(rows.len(), cols.len(), data)
}

/// Compresses one node. Returns `None` when the design is empty, in which
/// case the node must never be pruned.
///
/// With at most `rank` candidates the skeleton is the candidate set itself
/// and the weights are unchanged.
pub fn skeletonize_node(
    node: NodeId,
    candidates: &[usize],
    candidate_weights: &[f64],
    design: &SampleDesign,
    kernel: &KernelSpec,
    points: &PointSet,
    rank: usize,
) -> Result<Option<Skeleton>> {
    if rank == 0 {
        return invalid("skeleton rank must be at least 1");
    }
    if candidates.len() != candidate_weights.len() {
        return invalid("one weight per candidate required");
    }
    if design.is_empty() || candidates.is_empty() {
        return Ok(None);
    }
    if candidates.len() <= rank {
        return Ok(Some(Skeleton {
            node,
            indices: candidates.to_vec(),
            redundant: Vec::new(),
            proj: Mat::zeros(candidates.len(), 0),
            effective_weights: candidate_weights.to_vec(),
            rank: candidates.len(),
            sample_rows: design.len(),
        }));
    }
    let s = rank.min(design.len());
    let a = kernel_block(kernel, points, &design.rows, candidates);
    let id = interpolative_decomposition(&a, s)?;
    Ok(Some(Skeleton {
        node,
        indices: id.skeleton.iter().map(|&c| candidates[c]).collect(),
        redundant: id.redundant.iter().map(|&c| candidates[c]).collect(),
        effective_weights: id.fold_weights(candidate_weights),
        proj: id.proj,
        rank: id.rank,
        sample_rows: design.len(),
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeStatus {
    Compressed,
    /// Too close to the root to have a meaningful far field.
    AboveMinLevel,
    /// No sample rows were available.
    EmptyDesign,
    /// Both children are non-compressible, or one child has no
    /// representation at all.
    ChildrenNonCompressible,
}

/// Skeletons for every node of a tree.
#[derive(Clone, Debug)]
pub struct SkeletonSet {
    skeletons: Vec<Option<Skeleton>>,
    status: Vec<NodeStatus>,
    candidates: Vec<usize>,
}

impl SkeletonSet {
    #[inline]
    pub fn get(&self, node: NodeId) -> Option<&Skeleton> {
        self.skeletons.get(node).and_then(Option::as_ref)
    }

    pub fn status(&self, node: NodeId) -> NodeStatus {
        self.status[node]
    }

    /// Number of candidate sources the node's skeleton was chosen from
    /// (0 for nodes that were never processed).
    pub fn candidate_count(&self, node: NodeId) -> usize {
        self.candidates[node]
    }

    pub fn len(&self) -> usize {
        self.skeletons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skeletons.is_empty()
    }

    pub fn compressed_count(&self) -> usize {
        self.skeletons.iter().filter(|s| s.is_some()).count()
    }
}

struct NodeResult {
    status: NodeStatus,
    skeleton: Option<Skeleton>,
    /// Representation handed to the parent: skeleton points with folded
    /// weights, or the uncompressed candidates of an empty-design node
    /// (usable only next to a compressed sibling).
    upward: Option<(Vec<usize>, Vec<f64>)>,
    candidates: usize,
}

/// Skeletonizes all nodes bottom-up, one level at a time.
pub fn build_all_skeletons(
    tree: &SpaceTree,
    knn: &KnnGraph,
    kernel: &KernelSpec,
    points: &PointSet,
    weights: &WeightVector,
    cfg: &SkeletonConfig,
) -> Result<SkeletonSet> {
    let n = points.len();
    if tree.num_points() != n || knn.n() != n {
        return invalid("tree, neighbor graph and points disagree on N");
    }
    weights.check_len(points)?;
    kernel.validate(Some(n))?;
    if cfg.rank == 0 {
        return invalid("skeleton rank must be at least 1");
    }

    let num_nodes = tree.nodes().len();
    let mut skeletons: Vec<Option<Skeleton>> = vec![None; num_nodes];
    let mut status = vec![NodeStatus::AboveMinLevel; num_nodes];
    let mut candidates = vec![0; num_nodes];
    let mut upward: Vec<Option<(Vec<usize>, Vec<f64>)>> = vec![None; num_nodes];

    let too_high = |id: NodeId| -> bool {
        let node = tree.node(id);
        match cfg.min_skeleton_level {
            Some(level) => node.level < level,
            None => 2 * node.len() > n,
        }
    };

    for level in tree.levels().into_iter().rev() {
        let results: Vec<(NodeId, Result<NodeResult>)> = level
            .par_iter()
            .filter(|&&id| !too_high(id))
            .map(|&id| {
                let res = process_node(id, tree, knn, kernel, points, weights, cfg, &upward, &status);
                (id, res)
            })
            .collect();
        for (id, res) in results {
            let res = res?;
            status[id] = res.status;
            skeletons[id] = res.skeleton;
            upward[id] = res.upward;
            candidates[id] = res.candidates;
        }
    }
    Ok(SkeletonSet {
        skeletons,
        status,
        candidates,
    })
}

#[allow(clippy::too_many_arguments)]
fn process_node(
    id: NodeId,
    tree: &SpaceTree,
    knn: &KnnGraph,
    kernel: &KernelSpec,
    points: &PointSet,
    weights: &WeightVector,
    cfg: &SkeletonConfig,
    upward: &[Option<(Vec<usize>, Vec<f64>)>],
    status: &[NodeStatus],
) -> Result<NodeResult> {
    let (cand, cand_w): (Vec<usize>, Vec<f64>) = match tree.node(id).children {
        None => {
            let owned = tree.owned(id).to_vec();
            let w = owned.iter().map(|&j| weights[j]).collect();
            (owned, w)
        }
        Some([l, r]) => match (&upward[l], &upward[r]) {
            (Some(a), Some(b))
                if status[l] == NodeStatus::Compressed || status[r] == NodeStatus::Compressed =>
            {
                let mut c = a.0.clone();
                c.extend_from_slice(&b.0);
                let mut w = a.1.clone();
                w.extend_from_slice(&b.1);
                (c, w)
            }
            _ => {
                return Ok(NodeResult {
                    status: NodeStatus::ChildrenNonCompressible,
                    skeleton: None,
                    upward: None,
                    candidates: 0,
                })
            }
        },
    };
    let design = build_sample_design(
        id,
        tree,
        knn,
        &cand,
        cfg.uniform_samples,
        cfg.neighbor_cap(),
        cfg.seed,
    );
    let ncand = cand.len();
    match skeletonize_node(id, &cand, &cand_w, &design, kernel, points, cfg.rank)? {
        Some(skel) => {
            let up = (skel.indices.clone(), skel.effective_weights.clone());
            Ok(NodeResult {
                status: NodeStatus::Compressed,
                skeleton: Some(skel),
                upward: Some(up),
                candidates: ncand,
            })
        }
        None => Ok(NodeResult {
            status: NodeStatus::EmptyDesign,
            skeleton: None,
            upward: Some((cand, cand_w)),
            candidates: ncand,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::knn_exact;
    use crate::spacetree::SplitRule;
    use rand::Rng;

    fn random_points(n: usize, d: usize, seed: u64) -> PointSet {
        let mut rng = stream_rng(seed, 1);
        PointSet::new((0..n * d).map(|_| rng.random::<f64>()).collect(), d).unwrap()
    }

    #[test]
    fn root_design_is_empty() {
        let pts = random_points(100, 2, 0);
        let tree = SpaceTree::build(&pts, 10, SplitRule::MedianProjection, 0).unwrap();
        let knn = knn_exact(&pts, 5).unwrap();
        let owned = tree.owned(SpaceTree::ROOT).to_vec();
        let d = build_sample_design(SpaceTree::ROOT, &tree, &knn, &owned, 50, 1000, 0);
        assert!(d.is_empty());
    }

    #[test]
    fn internal_neighbors_without_padding_give_empty_design() {
        // two well separated clusters of three, one per leaf
        let pts = PointSet::new(vec![0.0, 0.1, 0.2, 100.0, 100.1, 100.2], 1).unwrap();
        let tree = SpaceTree::build(&pts, 3, SplitRule::WidestCoordinate, 0).unwrap();
        let knn = knn_exact(&pts, 2).unwrap();
        let leaf = tree.leaf_of(0);
        let owned = tree.owned(leaf).to_vec();
        let d = build_sample_design(leaf, &tree, &knn, &owned, 0, 100, 0);
        assert!(d.is_empty());
        let d = build_sample_design(leaf, &tree, &knn, &owned, 2, 100, 0);
        assert_eq!(d.len(), 2);
        assert!(d.rows.iter().all(|&r| r >= 3));
    }

    #[test]
    fn design_audit() {
        let pts = random_points(2048, 3, 1);
        let tree = SpaceTree::build(&pts, 64, SplitRule::MedianProjection, 0).unwrap();
        let knn = knn_exact(&pts, 10).unwrap();
        for leaf in tree.leaves().take(8) {
            let owned = tree.owned(leaf).to_vec();
            let d = build_sample_design(leaf, &tree, &knn, &owned, 32, usize::MAX, 3);
            assert!(d.len() <= 64 * 10 + 32);
            assert!(d.len() >= 32);
            assert!(d.rows.iter().all(|&r| !tree.node_owns(leaf, r)));
            assert!(d.rows.windows(2).all(|w| w[0] < w[1]));
            let capped = build_sample_design(leaf, &tree, &knn, &owned, 32, 40, 3);
            assert!(capped.len() <= 40 + 32);
            assert_eq!(capped, build_sample_design(leaf, &tree, &knn, &owned, 32, 40, 3));
        }
    }

    #[test]
    fn small_candidate_sets_are_kept_verbatim() {
        let pts = random_points(20, 2, 2);
        let kernel = KernelSpec::gaussian(0.5).unwrap();
        let design = SampleDesign {
            node: 1,
            rows: vec![10, 11, 12],
        };
        let cand = [0, 3, 5];
        let w = [0.5, -1.0, 2.0];
        let skel = skeletonize_node(1, &cand, &w, &design, &kernel, &pts, 3)
            .unwrap()
            .unwrap();
        assert_eq!(skel.indices, cand);
        assert_eq!(skel.effective_weights, w);

        let empty = SampleDesign { node: 1, rows: vec![] };
        assert!(skeletonize_node(1, &cand, &w, &empty, &kernel, &pts, 3).unwrap().is_none());
    }

    #[test]
    fn coincident_sources_fold_to_weight_sum() {
        let mut data = Vec::new();
        for _ in 0..10 {
            data.extend_from_slice(&[0.3, 0.7]);
        }
        for i in 0..20 {
            data.extend_from_slice(&[1.0 + 0.1 * i as f64, -0.5 * i as f64]);
        }
        let pts = PointSet::new(data, 2).unwrap();
        let kernel = KernelSpec::gaussian(2.0).unwrap();
        let cand: Vec<usize> = (0..10).collect();
        let w: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let design = SampleDesign {
            node: 0,
            rows: (10..30).collect(),
        };
        let skel = skeletonize_node(0, &cand, &w, &design, &kernel, &pts, 1)
            .unwrap()
            .unwrap();
        assert_eq!(skel.len(), 1);
        let total: f64 = w.iter().sum();
        assert!((skel.effective_weights[0] - total).abs() <= 1e-10);
    }

    #[test]
    fn single_leaf_tree_has_no_skeleton() {
        let pts = random_points(30, 2, 3);
        let tree = SpaceTree::build(&pts, 64, SplitRule::MedianProjection, 0).unwrap();
        let knn = knn_exact(&pts, 4).unwrap();
        let w = WeightVector::new(vec![1.0; 30]).unwrap();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let set = build_all_skeletons(&tree, &knn, &kernel, &pts, &w, &SkeletonConfig::new(8, 8, 0)).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.get(0).is_none());
        assert_eq!(set.status(0), NodeStatus::AboveMinLevel);
    }

    #[test]
    fn saturated_rank_conserves_weights() {
        let pts = random_points(256, 3, 4);
        let tree = SpaceTree::build(&pts, 32, SplitRule::MedianProjection, 1).unwrap();
        let knn = knn_exact(&pts, 6).unwrap();
        let w = WeightVector::new((0..256).map(|i| (i as f64).cos()).collect()).unwrap();
        let kernel = KernelSpec::gaussian(0.4).unwrap();
        let cfg = SkeletonConfig::new(256, 16, 2);
        let set = build_all_skeletons(&tree, &knn, &kernel, &pts, &w, &cfg).unwrap();
        for id in 0..set.len() {
            if let Some(s) = set.get(id) {
                assert_eq!(s.redundant.len(), 0);
                let owned: f64 = tree.owned(id).iter().map(|&j| w[j]).sum();
                let eff: f64 = s.effective_weights.iter().sum();
                assert!((owned - eff).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn internal_candidates_are_children_skeletons() {
        let pts = random_points(1024, 4, 5);
        let tree = SpaceTree::build(&pts, 64, SplitRule::MedianProjection, 2).unwrap();
        assert_eq!(tree.depth(), 4);
        let knn = knn_exact(&pts, 8).unwrap();
        let w = WeightVector::new(vec![1.0; 1024]).unwrap();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let s = 16;
        let mut cfg = SkeletonConfig::new(s, 32, 3);
        cfg.min_skeleton_level = Some(1);
        let set = build_all_skeletons(&tree, &knn, &kernel, &pts, &w, &cfg).unwrap();
        let mut internal = 0;
        for (id, node) in tree.nodes().iter().enumerate() {
            let Some(skel) = set.get(id) else { continue };
            assert_eq!(skel.len(), s);
            assert!(skel.indices.iter().all(|&j| tree.node_owns(id, j)));
            if let Some([l, r]) = node.children {
                internal += 1;
                assert_eq!(set.candidate_count(id), 2 * s);
                let mut expect: Vec<usize> = set.get(l).unwrap().indices.clone();
                expect.extend(&set.get(r).unwrap().indices);
                let mut got: Vec<usize> = skel.indices.iter().chain(&skel.redundant).copied().collect();
                expect.sort_unstable();
                got.sort_unstable();
                assert_eq!(got, expect);
            }
        }
        assert_eq!(internal, 14);
        assert!(set.get(0).is_none());
    }

    #[test]
    fn non_compressible_markers_propagate() {
        // mutual-nearest pairs, one pair per leaf; without uniform padding
        // every leaf design is empty
        let data: Vec<f64> = (0..8).flat_map(|i| [i as f64, i as f64 + 0.001]).collect();
        let pts = PointSet::new(data, 1).unwrap();
        let tree = SpaceTree::build(&pts, 2, SplitRule::WidestCoordinate, 0).unwrap();
        let knn = knn_exact(&pts, 1).unwrap();
        let w = WeightVector::new(vec![1.0; 16]).unwrap();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let mut cfg = SkeletonConfig::new(1, 0, 0);
        cfg.min_skeleton_level = Some(1);
        let set = build_all_skeletons(&tree, &knn, &kernel, &pts, &w, &cfg).unwrap();
        for leaf in tree.leaves() {
            assert_eq!(set.status(leaf), NodeStatus::EmptyDesign);
            assert!(set.get(leaf).is_none());
        }
        for (id, node) in tree.nodes().iter().enumerate() {
            if node.level >= 1 && !node.is_leaf() {
                assert_eq!(set.status(id), NodeStatus::ChildrenNonCompressible);
            }
        }
        assert_eq!(set.status(0), NodeStatus::AboveMinLevel);
        assert_eq!(set.compressed_count(), 0);
    }
}
