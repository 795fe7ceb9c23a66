//! Approximate k-nearest-neighbor graphs from random projection trees.
//!
//! Each tree splits on the median projection onto a random unit direction.
//! The greedy search takes, for every point, the union of the leaves that
//! contain it across several independently seeded trees and keeps the `k`
//! closest candidates. [`knn_exact`] is the brute-force reference.

use std::cmp::Ordering;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::data::{sq_dist, PointSet};
use crate::error::{invalid, Error, Result};
use crate::rng::{dot, stream_rng, unit_direction};

/// `k` neighbors per point, sorted by nondecreasing distance (ties by
/// lower index). A point never lists itself.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnGraph {
    n: usize,
    k: usize,
    neighbors: Vec<usize>,
    distances: Vec<f64>,
}

#[inline]
fn cmp_candidate(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl KnnGraph {
    fn from_rows(n: usize, k: usize, rows: Vec<Vec<(f64, usize)>>) -> Self {
        let mut neighbors = Vec::with_capacity(n * k);
        let mut distances = Vec::with_capacity(n * k);
        for row in rows {
            debug_assert_eq!(row.len(), k);
            for (d, j) in row {
                neighbors.push(j);
                distances.push(d);
            }
        }
        Self {
            n,
            k,
            neighbors,
            distances,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// Keeps only the first `k` neighbors of every row.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k {
            return invalid(format!("cannot truncate a {}-NN graph to k={k}", self.k));
        }
        let mut neighbors = Vec::with_capacity(self.n * k);
        let mut distances = Vec::with_capacity(self.n * k);
        for i in 0..self.n {
            neighbors.extend_from_slice(&self.neighbors(i)[..k]);
            distances.extend_from_slice(&self.distances(i)[..k]);
        }
        Ok(Self {
            n: self.n,
            k,
            neighbors,
            distances,
        })
    }

    /// Binary layout: `n` and `k` as little-endian `u64`, then `n * k`
    /// indices as `u64`, then `n * k` distances as `f64`.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.k as u64).to_le_bytes())?;
        for &j in &self.neighbors {
            w.write_all(&(j as u64).to_le_bytes())?;
        }
        for &d in &self.distances {
            w.write_all(&d.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut word)
                .map_err(|e| Error::Parse(format!("truncated neighbor graph: {e}")))?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let k = u64::from_le_bytes(next(&mut r)?) as usize;
        let len = n
            .checked_mul(k)
            .ok_or_else(|| Error::Parse("neighbor graph header overflows".into()))?;
        let mut neighbors = Vec::with_capacity(len);
        for _ in 0..len {
            let j = u64::from_le_bytes(next(&mut r)?) as usize;
            if j >= n {
                return Err(Error::Parse(format!("neighbor index {j} out of range (n={n})")));
            }
            neighbors.push(j);
        }
        let mut distances = Vec::with_capacity(len);
        for _ in 0..len {
            distances.push(f64::from_le_bytes(next(&mut r)?));
        }
        Ok(Self {
            n,
            k,
            neighbors,
            distances,
        })
    }

    /// Checks the structural invariants against the point set it was built on.
    pub fn validate(&self, points: &PointSet, tol: f64) -> Result<()> {
        if self.n != points.len() {
            return invalid(format!("graph has {} rows for {} points", self.n, points.len()));
        }
        for i in 0..self.n {
            let nb = self.neighbors(i);
            let ds = self.distances(i);
            for r in 0..self.k {
                let j = nb[r];
                if j == i {
                    return invalid(format!("point {i} lists itself"));
                }
                if nb[..r].contains(&j) {
                    return invalid(format!("point {i} lists {j} twice"));
                }
                if r > 0 && ds[r] < ds[r - 1] {
                    return invalid(format!("row {i} is not sorted"));
                }
                let true_d = sq_dist(points.row(i), points.row(j)).sqrt();
                if (true_d - ds[r]).abs() > tol * true_d.max(1.0) {
                    return invalid(format!("distance {i}->{j} is {}, expected {true_d}", ds[r]));
                }
            }
        }
        Ok(())
    }
}

/// A node of a random projection tree. Points with projection `<=
/// threshold` go left.
#[derive(Clone, Debug)]
pub enum RpNode {
    Split {
        direction: Vec<f64>,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        indices: Vec<usize>,
    },
}

#[derive(Clone, Debug)]
pub struct RpTree {
    nodes: Vec<RpNode>,
    leaf_size: usize,
}

impl RpTree {
    pub fn nodes(&self) -> &[RpNode] {
        &self.nodes
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[usize]> {
        self.nodes.iter().filter_map(|n| match n {
            RpNode::Leaf { indices } => Some(indices.as_slice()),
            _ => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[RpNode], id: usize) -> usize {
            match &nodes[id] {
                RpNode::Leaf { .. } => 0,
                RpNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Descends by threshold comparisons to the leaf a query falls in.
    pub fn route(&self, query: &[f64]) -> &[usize] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                RpNode::Leaf { indices } => return indices,
                RpNode::Split {
                    direction,
                    threshold,
                    left,
                    right,
                } => {
                    id = if dot(direction, query) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// Attempts per node to find a direction that separates the points before
/// falling back to an index split.
const SPLIT_ATTEMPTS: usize = 4;

pub fn build_rp_tree(points: &PointSet, leaf_size: usize, rng_seed: u64) -> Result<RpTree> {
    rp_tree_from_stream(points, leaf_size, rng_seed, 0)
}

fn rp_tree_from_stream(points: &PointSet, leaf_size: usize, seed: u64, stream: u64) -> Result<RpTree> {
    if leaf_size == 0 {
        return invalid("leaf_size must be at least 1");
    }
    let mut rng = stream_rng(seed, stream);
    let mut nodes = Vec::new();
    let all: Vec<usize> = (0..points.len()).collect();
    build_rp_node(points, all, leaf_size, &mut rng, &mut nodes);
    Ok(RpTree { nodes, leaf_size })
}

fn build_rp_node(
    points: &PointSet,
    indices: Vec<usize>,
    leaf_size: usize,
    rng: &mut impl rand::Rng,
    nodes: &mut Vec<RpNode>,
) -> usize {
    let id = nodes.len();
    if indices.len() <= leaf_size {
        nodes.push(RpNode::Leaf { indices });
        return id;
    }
    nodes.push(RpNode::Leaf { indices: Vec::new() });

    let n = indices.len();
    let mut split = None;
    for _ in 0..SPLIT_ATTEMPTS {
        let direction = unit_direction(rng, points.dim());
        let mut proj: Vec<(f64, usize)> = indices
            .iter()
            .map(|&i| (dot(&direction, points.row(i)), i))
            .collect();
        proj.sort_unstable_by(cmp_candidate);
        // lower median; if the ties reach the top, split just below them
        let mut threshold = proj[n / 2 - 1].0;
        let mut n_left = proj.partition_point(|p| p.0 <= threshold);
        if n_left == n {
            n_left = proj.partition_point(|p| p.0 < threshold);
            if n_left == 0 {
                continue;
            }
            threshold = proj[n_left - 1].0;
        }
        let left = proj[..n_left].iter().map(|p| p.1).collect();
        let right = proj[n_left..].iter().map(|p| p.1).collect();
        split = Some((direction, threshold, left, right));
        break;
    }
    let (direction, threshold, left, right) = split.unwrap_or_else(|| {
        // every direction collapsed the points: coincident points
        let mut sorted = indices;
        sorted.sort_unstable();
        let right = sorted.split_off(n / 2);
        (vec![0.0; points.dim()], 0.0, sorted, right)
    });
    let l = build_rp_node(points, left, leaf_size, rng, nodes);
    let r = build_rp_node(points, right, leaf_size, rng, nodes);
    nodes[id] = RpNode::Split {
        direction,
        threshold,
        left: l,
        right: r,
    };
    id
}

fn check_k(points: &PointSet, k: usize) -> Result<()> {
    if k == 0 || k >= points.len() {
        return invalid(format!(
            "k must satisfy 1 <= k < N, got k={k}, N={}",
            points.len()
        ));
    }
    Ok(())
}

/// Inserts a candidate into a sorted, bounded, duplicate-free row.
#[inline]
fn offer(row: &mut Vec<(f64, usize)>, cand: (f64, usize), k: usize) {
    if row.len() == k && cmp_candidate(&cand, row.last().unwrap()) != Ordering::Less {
        return;
    }
    // a given pair always yields the same distance, so duplicates compare equal
    if let Err(pos) = row.binary_search_by(|p| cmp_candidate(p, &cand)) {
        row.insert(pos, cand);
        row.truncate(k);
    }
}

fn exact_row(points: &PointSet, i: usize, k: usize) -> Vec<(f64, usize)> {
    let x = points.row(i);
    let mut all: Vec<(f64, usize)> = (0..points.len())
        .filter(|&j| j != i)
        .map(|j| (sq_dist(x, points.row(j)).sqrt(), j))
        .collect();
    if k < all.len() {
        all.select_nth_unstable_by(k, cmp_candidate);
        all.truncate(k);
    }
    all.sort_unstable_by(cmp_candidate);
    all
}

/// Exact k nearest neighbors by brute force, ties broken by lower index.
pub fn knn_exact(points: &PointSet, k: usize) -> Result<KnnGraph> {
    check_k(points, k)?;
    let rows = (0..points.len())
        .into_par_iter()
        .map(|i| exact_row(points, i, k))
        .collect();
    Ok(KnnGraph::from_rows(points.len(), k, rows))
}

/// Approximate k nearest neighbors from `num_trees` random projection trees.
///
/// Tree `t` draws from stream `t + 1` of `rng_seed`, so the trees of a smaller
/// forest are a prefix of a larger one. A point whose leaves hold fewer
/// than `k` other points gets its row completed by brute force.
pub fn knn_greedy(
    points: &PointSet,
    k: usize,
    num_trees: usize,
    leaf_size: usize,
    rng_seed: u64,
) -> Result<KnnGraph> {
    check_k(points, k)?;
    if num_trees == 0 {
        return invalid("num_trees must be at least 1");
    }
    if leaf_size == 0 {
        return invalid("leaf_size must be at least 1");
    }
    let n = points.len();
    let mut rows: Vec<Vec<(f64, usize)>> = vec![Vec::with_capacity(k + 1); n];
    for t in 0..num_trees {
        let tree = rp_tree_from_stream(points, leaf_size, rng_seed, 1 + t as u64)?;
        let leaves: Vec<&[usize]> = tree.leaves().collect();
        let blocks: Vec<Vec<f64>> = leaves
            .par_iter()
            .map(|leaf| {
                let m = leaf.len();
                let mut block = Vec::with_capacity(m * (m.saturating_sub(1)) / 2);
                for a in 0..m {
                    let xa = points.row(leaf[a]);
                    for &b in &leaf[a + 1..] {
                        block.push(sq_dist(xa, points.row(b)).sqrt());
                    }
                }
                block
            })
            .collect();
        for (leaf, block) in leaves.iter().zip(blocks) {
            let mut it = block.into_iter();
            for a in 0..leaf.len() {
                for &b in &leaf[a + 1..] {
                    let d = it.next().unwrap();
                    offer(&mut rows[leaf[a]], (d, b), k);
                    offer(&mut rows[b], (d, leaf[a]), k);
                }
            }
        }
    }
    rows.par_iter_mut().enumerate().for_each(|(i, row)| {
        if row.len() < k {
            *row = exact_row(points, i, k);
        }
    });
    Ok(KnnGraph::from_rows(n, k, rows))
}

/// Mean fraction of the reference neighbors recovered per point.
pub fn recall(approx: &KnnGraph, exact: &KnnGraph) -> Result<f64> {
    if approx.n != exact.n || approx.k != exact.k {
        return invalid("recall needs graphs of identical shape");
    }
    let total: usize = (0..approx.n)
        .map(|i| {
            let a = approx.neighbors(i);
            exact.neighbors(i).iter().filter(|j| a.contains(j)).count()
        })
        .sum();
    Ok(total as f64 / (approx.n * approx.k) as f64)
}
