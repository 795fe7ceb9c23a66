//! Treecode evaluation with neighbor pruning, and the exact direct sum.
//!
//! For a target `i` the tree is descended from the root. A node is pruned,
//! i.e. its contribution is taken from its skeleton, iff it owns neither
//! `i` nor any of the first `k_prune` neighbors of `i` and it has a
//! skeleton. Leaves reached without pruning are summed directly. No
//! distances or bounding boxes enter the decision.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann::KnnGraph;
use crate::data::{PointSet, PotentialVector, WeightVector};
use crate::error::{invalid, Error, Result};
use crate::kernel::KernelSpec;
use crate::skeleton::SkeletonSet;
use crate::spacetree::{NodeId, SpaceTree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Leading neighbors of each target that must be summed directly.
    pub k_prune: usize,
    /// Whether `j == i` contributes to `u_i`.
    pub include_self: bool,
}

impl EvalConfig {
    pub fn new(k_prune: usize) -> Self {
        Self {
            k_prune,
            include_self: true,
        }
    }
}

/// Counters accumulated over all evaluated targets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub targets: u64,
    pub nodes_visited: u64,
    pub nodes_pruned: u64,
    pub direct_interactions: u64,
    pub skeleton_interactions: u64,
    /// Nodes that satisfied the neighbor rule but had no skeleton.
    pub missing_skeletons: u64,
    /// Sources accounted for, directly or through a pruned node; equals
    /// `targets * N` when every target covers the whole point set.
    pub points_accounted: u64,
    pub wall_time_secs: f64,
}

impl EvalStats {
    fn absorb(&mut self, o: &EvalStats) {
        self.targets += o.targets;
        self.nodes_visited += o.nodes_visited;
        self.nodes_pruned += o.nodes_pruned;
        self.direct_interactions += o.direct_interactions;
        self.skeleton_interactions += o.skeleton_interactions;
        self.missing_skeletons += o.missing_skeletons;
        self.points_accounted += o.points_accounted;
    }

    /// Fraction of kernel evaluations made against skeletons.
    pub fn skeleton_fraction(&self) -> f64 {
        let total = self.direct_interactions + self.skeleton_interactions;
        if total == 0 {
            0.0
        } else {
            self.skeleton_interactions as f64 / total as f64
        }
    }
}

/// How a node contributes to one target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interaction {
    /// Leaf summed point by point.
    Near(NodeId),
    /// Node represented by its skeleton.
    Far(NodeId),
}

/// Everything the evaluation reads, built for one point set and weight
/// vector.
#[derive(Clone, Copy)]
pub struct Treecode<'a> {
    pub points: &'a PointSet,
    pub weights: &'a WeightVector,
    pub kernel: &'a KernelSpec,
    pub tree: &'a SpaceTree,
    pub knn: &'a KnnGraph,
    pub skeletons: &'a SkeletonSet,
}

/// Neighbor pruning rule, stated directly: `node` owns neither `target`
/// nor any of its first `k_prune` neighbors, and has a skeleton.
pub fn prunable(
    target: usize,
    node: NodeId,
    knn: &KnnGraph,
    tree: &SpaceTree,
    skeletons: &SkeletonSet,
    cfg: &EvalConfig,
) -> bool {
    !tree.node_owns(node, target)
        && knn.neighbors(target)[..cfg.k_prune.min(knn.k())]
            .iter()
            .all(|&j| !tree.node_owns(node, j))
        && skeletons.get(node).is_some()
}

/// Per-target record of the traversal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TargetTrace {
    pub near: Vec<NodeId>,
    pub far: Vec<NodeId>,
}

impl TargetTrace {
    /// Sources covered by the near leaves and pruned nodes; `N` when the
    /// near/far split is a partition.
    pub fn points_accounted(&self, tree: &SpaceTree) -> usize {
        self.near.iter().chain(&self.far).map(|&v| tree.node(v).len()).sum()
    }

    /// Original indices summed directly, in summation order.
    pub fn direct_sources<'t>(&'t self, tree: &'t SpaceTree) -> impl Iterator<Item = usize> + 't {
        self.near.iter().flat_map(move |&leaf| tree.owned(leaf).iter().copied())
    }
}

impl<'a> Treecode<'a> {
    pub fn check(&self, cfg: &EvalConfig) -> Result<()> {
        let n = self.points.len();
        self.weights.check_len(self.points)?;
        self.kernel.validate(Some(n))?;
        if self.tree.num_points() != n || self.knn.n() != n {
            return invalid("tree, neighbor graph and points disagree on N");
        }
        if self.skeletons.len() != self.tree.nodes().len() {
            return invalid("skeletons were built for a different tree");
        }
        if cfg.k_prune == 0 || cfg.k_prune > self.knn.k() {
            return invalid(format!(
                "k_prune must satisfy 1 <= k_prune <= k = {}, got {}",
                self.knn.k(),
                cfg.k_prune
            ));
        }
        Ok(())
    }

    /// Sorted tree positions of the target and its first `k_prune`
    /// neighbors. A node owns one of them iff its position range
    /// intersects this list.
    fn protected_positions(&self, target: usize, k_prune: usize) -> Vec<usize> {
        let mut pos: Vec<usize> = std::iter::once(target)
            .chain(self.knn.neighbors(target)[..k_prune].iter().copied())
            .map(|j| self.tree.position(j))
            .collect();
        pos.sort_unstable();
        pos
    }

    /// Walks the tree for one target, reporting each near leaf and pruned
    /// node in depth-first, left-first order.
    pub fn traverse(
        &self,
        target: usize,
        cfg: &EvalConfig,
        stats: &mut EvalStats,
        mut visit: impl FnMut(Interaction),
    ) {
        let protected = self.protected_positions(target, cfg.k_prune);
        let mut stack = vec![SpaceTree::ROOT];
        while let Some(id) = stack.pop() {
            stats.nodes_visited += 1;
            let node = self.tree.node(id);
            let first = protected.partition_point(|&p| p < node.begin);
            let owns_protected = first < protected.len() && protected[first] < node.end;
            if !owns_protected {
                if self.skeletons.get(id).is_some() {
                    stats.nodes_pruned += 1;
                    stats.points_accounted += node.len() as u64;
                    visit(Interaction::Far(id));
                    continue;
                }
                stats.missing_skeletons += 1;
            }
            match node.children {
                None => {
                    stats.points_accounted += node.len() as u64;
                    visit(Interaction::Near(id));
                }
                Some([l, r]) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
    }

    pub fn trace(&self, target: usize, cfg: &EvalConfig) -> TargetTrace {
        let mut trace = TargetTrace::default();
        let mut stats = EvalStats::default();
        self.traverse(target, cfg, &mut stats, |ia| match ia {
            Interaction::Near(v) => trace.near.push(v),
            Interaction::Far(v) => trace.far.push(v),
        });
        trace
    }

    /// Potential at one target, with its counters.
    pub fn eval_target(&self, target: usize, cfg: &EvalConfig) -> (f64, EvalStats) {
        let x = self.points.row(target);
        let tree_points = self.tree.tree_points();
        let perm = self.tree.permutation();
        let w = self.weights.as_slice();
        let mut stats = EvalStats {
            targets: 1,
            ..Default::default()
        };
        let (mut near, mut far) = (0.0, 0.0);
        let mut direct = 0u64;
        let mut skel_evals = 0u64;
        self.traverse(target, cfg, &mut stats, |ia| match ia {
            Interaction::Near(leaf) => {
                for pos in self.tree.node(leaf).range() {
                    let j = perm[pos];
                    if !cfg.include_self && j == target {
                        continue;
                    }
                    near += self.kernel.eval_unchecked(x, tree_points.row(pos), j) * w[j];
                    direct += 1;
                }
            }
            Interaction::Far(node) => {
                let skel = self.skeletons.get(node).expect("pruned node has a skeleton");
                far += skel.potential(self.kernel, self.points, x);
                skel_evals += skel.len() as u64;
            }
        });
        stats.direct_interactions = direct;
        stats.skeleton_interactions = skel_evals;
        (near + far, stats)
    }
}

/// Approximate potentials at `targets`; entry `t` of the result belongs to
/// `targets[t]`. Targets are evaluated independently, so the result does
/// not depend on the thread count.
pub fn treecode_eval(
    tc: &Treecode<'_>,
    cfg: &EvalConfig,
    targets: &[usize],
) -> Result<(PotentialVector, EvalStats)> {
    tc.check(cfg)?;
    check_targets(targets, tc.points.len())?;
    let start = Instant::now();
    let per_target: Vec<(f64, EvalStats)> = targets
        .par_iter()
        .map(|&i| tc.eval_target(i, cfg))
        .collect();
    let mut stats = EvalStats::default();
    let mut u = Vec::with_capacity(targets.len());
    for (v, s) in &per_target {
        u.push(*v);
        stats.absorb(s);
    }
    stats.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((PotentialVector(u), stats))
}

fn check_targets(targets: &[usize], n: usize) -> Result<()> {
    match targets.iter().find(|&&i| i >= n) {
        Some(i) => invalid(format!("target index {i} out of range (n={n})")),
        None => Ok(()),
    }
}

/// `u_i = sum_j K(x_i, x_j) w_j` for each listed target, summing over
/// `j = 0..N` in index order.
pub fn direct_sum(
    points: &PointSet,
    weights: &WeightVector,
    kernel: &KernelSpec,
    targets: &[usize],
    include_self: bool,
) -> Result<PotentialVector> {
    weights.check_len(points)?;
    kernel.validate(Some(points.len()))?;
    check_targets(targets, points.len())?;
    let w = weights.as_slice();
    let u = targets
        .par_iter()
        .map(|&i| {
            let x = points.row(i);
            let mut acc = 0.0;
            for (j, src) in points.rows().enumerate() {
                if include_self || j != i {
                    acc += kernel.eval_unchecked(x, src, j) * w[j];
                }
            }
            acc
        })
        .collect();
    Ok(PotentialVector(u))
}

/// `||approx - exact||_2 / ||exact||_2` restricted to `sample`.
pub fn relative_error(approx: &[f64], exact: &[f64], sample: &[usize]) -> Result<f64> {
    if approx.len() != exact.len() {
        return invalid(format!(
            "length mismatch: {} vs {}",
            approx.len(),
            exact.len()
        ));
    }
    check_targets(sample, exact.len())?;
    let (mut num, mut den) = (0.0, 0.0);
    for &i in sample {
        let d = approx[i] - exact[i];
        num += d * d;
        den += exact[i] * exact[i];
    }
    if den == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((num / den).sqrt())
}
