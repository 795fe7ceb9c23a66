//! Binary space-partitioning tree over the point set.
//!
//! Points are permuted into tree order at build time, so every node owns a
//! contiguous range of tree positions and membership is a range check.

use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::data::{sq_dist, PointSet};
use crate::error::{invalid, Error, Result};
use crate::rng::{dot, stream_rng, unit_direction};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRule {
    /// Median of the projections onto a random unit direction.
    #[default]
    MedianProjection,
    /// Median along the coordinate with the largest spread (kd split).
    WidestCoordinate,
    /// Median of the projections onto the line through an approximate
    /// farthest pair of the node's points.
    FarthestPair,
}

impl SplitRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitRule::MedianProjection => "median-projection",
            SplitRule::WidestCoordinate => "widest-coordinate",
            SplitRule::FarthestPair => "farthest-pair",
        }
    }
}

impl FromStr for SplitRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median-projection" => Ok(SplitRule::MedianProjection),
            "widest-coordinate" => Ok(SplitRule::WidestCoordinate),
            "farthest-pair" => Ok(SplitRule::FarthestPair),
            other => Err(Error::Parse(format!("unknown split rule '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    /// Owned tree positions `begin..end`.
    pub begin: usize,
    pub end: usize,
    pub level: usize,
    pub parent: Option<NodeId>,
    pub children: Option<[NodeId; 2]>,
}

impl TreeNode {
    #[inline]
    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }

    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    #[inline]
    pub fn range(&self) -> Range<usize> {
        self.begin..self.end
    }
}

/// Node ids are assigned breadth-first; the root is node 0.
#[derive(Clone, Debug)]
pub struct SpaceTree {
    nodes: Vec<TreeNode>,
    perm: Vec<usize>,
    position: Vec<usize>,
    leaf_of: Vec<NodeId>,
    points: PointSet,
    leaf_capacity: usize,
}

pub fn build_space_tree(
    points: &PointSet,
    leaf_capacity: usize,
    split_rule: SplitRule,
    rng_seed: u64,
) -> Result<SpaceTree> {
    SpaceTree::build(points, leaf_capacity, split_rule, rng_seed)
}

impl SpaceTree {
    pub fn build(
        points: &PointSet,
        leaf_capacity: usize,
        split_rule: SplitRule,
        rng_seed: u64,
    ) -> Result<Self> {
        if leaf_capacity == 0 {
            return invalid("leaf_capacity must be at least 1");
        }
        let n = points.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut nodes = vec![TreeNode {
            begin: 0,
            end: n,
            level: 0,
            parent: None,
            children: None,
        }];
        let mut keys: Vec<(f64, usize)> = Vec::with_capacity(n);

        let mut id = 0;
        while id < nodes.len() {
            let TreeNode {
                begin, end, level, ..
            } = nodes[id];
            if end - begin > leaf_capacity {
                let owned = &mut perm[begin..end];
                keys.clear();
                match split_rule {
                    SplitRule::MedianProjection => {
                        let dir = unit_direction(&mut stream_rng(rng_seed, id as u64), points.dim());
                        keys.extend(owned.iter().map(|&i| (dot(&dir, points.row(i)), i)));
                    }
                    SplitRule::WidestCoordinate => {
                        let axis = widest_axis(points, owned);
                        keys.extend(owned.iter().map(|&i| (points.row(i)[axis], i)));
                    }
                    SplitRule::FarthestPair => {
                        let dir = farthest_pair_direction(points, owned, rng_seed, id);
                        keys.extend(owned.iter().map(|&i| (dot(&dir, points.row(i)), i)));
                    }
                }
                // Ties resolve by original index, so the split is a strict
                // total order and stays balanced even for coincident points.
                let mid = keys.len() / 2;
                keys.select_nth_unstable_by(mid, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for (slot, key) in owned.iter_mut().zip(&keys) {
                    *slot = key.1;
                }
                let left = nodes.len();
                for (b, e) in [(begin, begin + mid), (begin + mid, end)] {
                    nodes.push(TreeNode {
                        begin: b,
                        end: e,
                        level: level + 1,
                        parent: Some(id),
                        children: None,
                    });
                }
                nodes[id].children = Some([left, left + 1]);
            }
            id += 1;
        }

        let mut position = vec![0; n];
        for (pos, &i) in perm.iter().enumerate() {
            position[i] = pos;
        }
        let mut leaf_of = vec![0; n];
        for (id, node) in nodes.iter().enumerate() {
            if node.is_leaf() {
                for &i in &perm[node.range()] {
                    leaf_of[i] = id;
                }
            }
        }
        let points = points.gather(&perm)?;
        Ok(Self {
            nodes,
            perm,
            position,
            leaf_of,
            points,
            leaf_capacity,
        })
    }

    pub const ROOT: NodeId = 0;

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn num_points(&self) -> usize {
        self.perm.len()
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    /// Original indices of the points owned by `node`, in tree order.
    #[inline]
    pub fn owned(&self, node: NodeId) -> &[usize] {
        &self.perm[self.nodes[node].range()]
    }

    /// Tree position of original point `j`.
    #[inline]
    pub fn position(&self, j: usize) -> usize {
        self.position[j]
    }

    /// Tree order to original index.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    #[inline]
    pub fn leaf_of(&self, j: usize) -> NodeId {
        self.leaf_of[j]
    }

    /// Whether `node` owns original point `j`. O(1).
    #[inline]
    pub fn node_owns(&self, node: NodeId, j: usize) -> bool {
        let n = &self.nodes[node];
        let p = self.position[j];
        n.begin <= p && p < n.end
    }

    /// Coordinates permuted into tree order.
    pub fn tree_points(&self) -> &PointSet {
        &self.points
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// Node ids grouped by level, root level first.
    pub fn levels(&self) -> Vec<Vec<NodeId>> {
        let mut levels = vec![Vec::new(); self.depth() + 1];
        for (id, node) in self.nodes.iter().enumerate() {
            levels[node.level].push(id);
        }
        levels
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&id| self.nodes[id].is_leaf())
    }
}

/// `q - p` where `p` is farthest from a random owned point and `q` is
/// farthest from `p`.
fn farthest_pair_direction(points: &PointSet, owned: &[usize], rng_seed: u64, id: NodeId) -> Vec<f64> {
    let start = owned[stream_rng(rng_seed, id as u64).random_range(0..owned.len())];
    let farthest = |from: usize| {
        let x = points.row(from);
        owned
            .iter()
            .map(|&i| (sq_dist(x, points.row(i)), i))
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
            .map_or(from, |(_, i)| i)
    };
    let p = farthest(start);
    let q = farthest(p);
    points.row(q).iter().zip(points.row(p)).map(|(a, b)| a - b).collect()
}

fn widest_axis(points: &PointSet, owned: &[usize]) -> usize {
    let d = points.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for &i in owned {
        for (a, &v) in points.row(i).iter().enumerate() {
            lo[a] = lo[a].min(v);
            hi[a] = hi[a].max(v);
        }
    }
    let mut best = 0;
    for a in 1..d {
        if hi[a] - lo[a] > hi[best] - lo[best] {
            best = a;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_points(n: usize, d: usize, seed: u64) -> PointSet {
        let mut rng = stream_rng(seed, 5);
        PointSet::new((0..n * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(), d).unwrap()
    }

    fn audit(tree: &SpaceTree) {
        let n = tree.num_points();
        assert_eq!(tree.node(SpaceTree::ROOT).range(), 0..n);
        let mut seen = vec![false; n];
        for &i in tree.permutation() {
            assert!(!seen[i]);
            seen[i] = true;
        }
        for (id, node) in tree.nodes().iter().enumerate() {
            match node.children {
                Some([l, r]) => {
                    let (l, r) = (tree.node(l), tree.node(r));
                    assert_eq!(l.begin, node.begin);
                    assert_eq!(l.end, r.begin);
                    assert_eq!(r.end, node.end);
                    assert_eq!(l.parent, Some(id));
                    assert_eq!(l.level, node.level + 1);
                    let mut union: Vec<usize> = tree.owned(node.children.unwrap()[0]).to_vec();
                    union.extend_from_slice(tree.owned(node.children.unwrap()[1]));
                    union.sort_unstable();
                    let mut own = tree.owned(id).to_vec();
                    own.sort_unstable();
                    assert_eq!(union, own);
                }
                None => {
                    assert!(!node.is_empty() && node.len() <= tree.leaf_capacity());
                    for &j in tree.owned(id) {
                        assert_eq!(tree.leaf_of(j), id);
                    }
                }
            }
        }
        for pos in 0..n {
            let j = tree.permutation()[pos];
            assert_eq!(tree.position(j), pos);
            assert_eq!(tree.tree_points().row(pos), tree_source_row(tree, j));
        }
    }

    fn tree_source_row(tree: &SpaceTree, j: usize) -> &[f64] {
        tree.tree_points().row(tree.position(j))
    }

    fn ceil_log2_ratio(n: usize, m: usize) -> usize {
        let mut depth = 0;
        while m << depth < n {
            depth += 1;
        }
        depth
    }

    #[test]
    fn small_set_is_single_leaf() {
        let pts = random_points(10, 3, 0);
        for rule in [SplitRule::MedianProjection, SplitRule::WidestCoordinate] {
            let t = SpaceTree::build(&pts, 10, rule, 0).unwrap();
            assert_eq!(t.nodes().len(), 1);
            audit(&t);
        }
        assert!(SpaceTree::build(&pts, 0, SplitRule::MedianProjection, 0).is_err());
    }

    #[test]
    fn points_on_a_line_split_into_sorted_pairs() {
        let xs = [5.0, 0.0, 7.0, 2.0, 1.0, 6.0, 3.0, 4.0];
        let pts = PointSet::new(xs.to_vec(), 1).unwrap();
        let t = SpaceTree::build(&pts, 2, SplitRule::WidestCoordinate, 0).unwrap();
        let mut leaves: Vec<Vec<f64>> = t
            .leaves()
            .map(|l| {
                let mut v: Vec<f64> = t.owned(l).iter().map(|&j| xs[j]).collect();
                v.sort_by(f64::total_cmp);
                v
            })
            .collect();
        leaves.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(
            leaves,
            vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0], vec![6.0, 7.0]]
        );
        // leaves appear left to right in tree order
        let order: Vec<f64> = t.permutation().iter().map(|&j| xs[j]).collect();
        for pair in order.chunks(2) {
            assert_eq!(pair[0].max(pair[1]) - pair[0].min(pair[1]), 1.0);
        }
        audit(&t);
    }

    #[test]
    fn structural_audit_large() {
        let pts = random_points(5000, 6, 1);
        for rule in [SplitRule::MedianProjection, SplitRule::WidestCoordinate, SplitRule::FarthestPair] {
            let t = SpaceTree::build(&pts, 64, rule, 3).unwrap();
            audit(&t);
            assert_eq!(t.depth(), ceil_log2_ratio(5000, 64));
        }
    }

    #[test]
    fn depth_bound_holds_across_sizes() {
        for (n, m) in [(2, 1), (17, 4), (100, 7), (1024, 32), (1025, 32), (333, 1)] {
            let t = SpaceTree::build(&random_points(n, 2, n as u64), m, SplitRule::MedianProjection, 0).unwrap();
            assert_eq!(t.depth(), ceil_log2_ratio(n, m), "n={n} m={m}");
        }
    }

    #[test]
    fn coincident_points_terminate_balanced() {
        let pts = PointSet::new(vec![0.25; 100 * 3], 3).unwrap();
        for rule in [SplitRule::MedianProjection, SplitRule::WidestCoordinate, SplitRule::FarthestPair] {
            let t = SpaceTree::build(&pts, 8, rule, 0).unwrap();
            audit(&t);
            assert_eq!(t.depth(), ceil_log2_ratio(100, 8));
        }
    }

    #[test]
    fn farthest_pair_separates_two_clusters() {
        let mut data = Vec::new();
        for i in 0..20 {
            let off = if i < 10 { 0.0 } else { 100.0 };
            data.extend([off + 0.01 * i as f64, 0.5 * (i % 3) as f64]);
        }
        let t = SpaceTree::build(&PointSet::new(data, 2).unwrap(), 10, SplitRule::FarthestPair, 4).unwrap();
        let [l, r] = t.node(SpaceTree::ROOT).children.unwrap();
        let mut left = t.owned(l).to_vec();
        left.sort_unstable();
        let mut right = t.owned(r).to_vec();
        right.sort_unstable();
        let low: Vec<usize> = (0..10).collect();
        let high: Vec<usize> = (10..20).collect();
        assert!((left == low && right == high) || (left == high && right == low));
    }

    #[test]
    fn split_rule_names_round_trip() {
        for rule in [SplitRule::MedianProjection, SplitRule::WidestCoordinate, SplitRule::FarthestPair] {
            assert_eq!(rule.as_str().parse::<SplitRule>().unwrap(), rule);
        }
        assert!("kd".parse::<SplitRule>().is_err());
    }

    #[test]
    fn rebuild_is_identical() {
        let pts = random_points(700, 4, 2);
        let a = SpaceTree::build(&pts, 16, SplitRule::MedianProjection, 9).unwrap();
        let b = SpaceTree::build(&pts, 16, SplitRule::MedianProjection, 9).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.permutation(), b.permutation());
    }

    #[test]
    fn membership_matches_linear_scan() {
        let pts = random_points(2000, 3, 4);
        let t = SpaceTree::build(&pts, 32, SplitRule::MedianProjection, 1).unwrap();
        for j in 0..2000 {
            assert!(t.node_owns(SpaceTree::ROOT, j));
        }
        let mut rng = stream_rng(77, 0);
        for _ in 0..1000 {
            let node = rng.random_range(0..t.nodes().len());
            let j = rng.random_range(0..2000);
            let scan = t.owned(node).contains(&j);
            assert_eq!(t.node_owns(node, j), scan);
        }
    }

    #[test]
    fn leaf_membership_example() {
        // four points, capacity 2: the leaf holding 3 does not own others
        let pts = PointSet::new(vec![0.0, 10.0, 1.0, 11.0], 1).unwrap();
        let t = SpaceTree::build(&pts, 2, SplitRule::WidestCoordinate, 0).unwrap();
        let leaf = t.leaf_of(3);
        let mut owned = t.owned(leaf).to_vec();
        owned.sort_unstable();
        assert_eq!(owned, vec![1, 3]);
        assert!(!t.node_owns(leaf, 0));
        assert!(!t.node_owns(leaf, 2));
    }
}
