//! End-to-end run: neighbors, tree, skeletons, evaluation, and an exact
//! check on a sample of targets.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ann::{knn_greedy, KnnGraph};
use crate::data::{PointSet, PotentialVector, WeightVector};
use crate::dataset::sample_indices;
use crate::error::{invalid, Error, Result};
use crate::evaluator::{direct_sum, relative_error, treecode_eval, EvalConfig, EvalStats, Treecode};
use crate::kernel::KernelSpec;
use crate::skeleton::{build_all_skeletons, SkeletonConfig, SkeletonSet};
use crate::spacetree::{SpaceTree, SplitRule};

/// Tunables of a run. Every count must be positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub k: usize,
    pub num_trees: usize,
    pub ann_leaf_size: usize,
    pub leaf_capacity: usize,
    pub split_rule: SplitRule,
    pub skeleton_size: usize,
    pub uniform_samples: usize,
    pub max_neighbor_rows: Option<usize>,
    pub min_skeleton_level: Option<usize>,
    /// Defaults to `k`.
    pub k_prune: Option<usize>,
    pub include_self: bool,
    /// Targets checked against the direct sum.
    pub target_sample: usize,
    pub seed: u64,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            k: 32,
            num_trees: 8,
            ann_leaf_size: 128,
            leaf_capacity: 128,
            split_rule: SplitRule::MedianProjection,
            skeleton_size: 64,
            uniform_samples: 64,
            max_neighbor_rows: None,
            min_skeleton_level: None,
            k_prune: None,
            include_self: true,
            target_sample: 1000,
            seed: 0,
            threads: None,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("k", self.k),
            ("num_trees", self.num_trees),
            ("ann_leaf_size", self.ann_leaf_size),
            ("leaf_capacity", self.leaf_capacity),
            ("skeleton_size", self.skeleton_size),
            ("target_sample", self.target_sample),
        ];
        for (name, v) in counts {
            if v == 0 {
                return invalid(format!("{name} must be positive"));
            }
        }
        if let Some(kp) = self.k_prune {
            if kp == 0 || kp > self.k {
                return invalid(format!("k_prune must be in 1..={}, got {kp}", self.k));
            }
        }
        if self.threads == Some(0) {
            return invalid("threads must be positive");
        }
        Ok(())
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            k_prune: self.k_prune.unwrap_or(self.k),
            include_self: self.include_self,
        }
    }

    pub fn skeleton_config(&self) -> SkeletonConfig {
        SkeletonConfig {
            rank: self.skeleton_size,
            uniform_samples: self.uniform_samples,
            max_neighbor_rows: self.max_neighbor_rows,
            min_skeleton_level: self.min_skeleton_level,
            seed: phase_seed(self.seed, Phase::Skeleton),
        }
    }
}

#[derive(Clone, Copy)]
pub(crate) enum Phase {
    Ann = 1,
    Tree = 2,
    Skeleton = 3,
    Sample = 4,
}

/// Decorrelated per-phase seed (splitmix64 finalizer).
pub(crate) fn phase_seed(seed: u64, phase: Phase) -> u64 {
    let mut z = seed ^ (phase as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub ann: f64,
    pub tree: f64,
    pub skeletonize: f64,
    pub eval: f64,
    pub direct_sample: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n: usize,
    pub d: usize,
    pub kernel: String,
    pub params: PipelineParams,
    pub timings: PhaseTimings,
    /// Relative 2-norm error against the direct sum on the sampled targets.
    pub relative_error: f64,
    pub sample_size: usize,
    pub stats: EvalStats,
    pub tree_nodes: usize,
    pub skeletons: usize,
    /// Per-target direct time times `n`.
    pub direct_time_extrapolated: f64,
    /// `direct_time_extrapolated / timings.eval`.
    pub speedup: f64,
}

/// Report plus the data it was computed from.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub report: RunReport,
    /// Treecode potentials for all `n` points.
    pub potentials: PotentialVector,
    /// Sampled targets and their exact potentials.
    pub sample: Vec<usize>,
    pub exact: PotentialVector,
    pub knn: KnnGraph,
    pub tree: SpaceTree,
    pub skeletons: SkeletonSet,
}

impl PipelineOutput {
    /// Evaluation view over the structures this run built.
    pub fn treecode<'a>(
        &'a self,
        points: &'a PointSet,
        weights: &'a WeightVector,
        kernel: &'a KernelSpec,
    ) -> Treecode<'a> {
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

/// Intermediate structures of a run, kept for inspection.
pub struct Prepared {
    pub knn: KnnGraph,
    pub tree: SpaceTree,
    pub skeletons: SkeletonSet,
    pub timings: PhaseTimings,
}

fn tagged<T>(phase: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Phase {
        phase,
        source: Box::new(e),
    })
}

/// Runs `f` on a pool with the requested number of threads.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(f)),
    }
}

/// The neighbor graph a run with `params` builds for itself.
pub fn build_knn(points: &PointSet, params: &PipelineParams) -> Result<KnnGraph> {
    knn_greedy(
        points,
        params.k,
        params.num_trees,
        params.ann_leaf_size,
        phase_seed(params.seed, Phase::Ann),
    )
}

/// Builds neighbors (unless `knn` is supplied), the tree and the skeletons.
pub fn prepare(
    points: &PointSet,
    weights: &WeightVector,
    kernel: &KernelSpec,
    params: &PipelineParams,
    knn: Option<KnnGraph>,
) -> Result<Prepared> {
    params.validate()?;
    weights.check_len(points)?;
    kernel.validate(Some(points.len()))?;
    let mut timings = PhaseTimings::default();

    let t = Instant::now();
    let knn = tagged("ann", match knn {
        Some(g) if g.n() != points.len() => invalid(format!(
            "cached neighbor graph has {} rows for {} points",
            g.n(),
            points.len()
        )),
        Some(g) if g.k() < params.k => invalid(format!(
            "cached neighbor graph has k={}, need {}",
            g.k(),
            params.k
        )),
        Some(g) if g.k() > params.k => g.truncated(params.k),
        Some(g) => Ok(g),
        None => build_knn(points, params),
    })?;
    timings.ann = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let tree = tagged(
        "tree",
        SpaceTree::build(
            points,
            params.leaf_capacity,
            params.split_rule,
            phase_seed(params.seed, Phase::Tree),
        ),
    )?;
    timings.tree = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let skeletons = tagged(
        "skeletonize",
        build_all_skeletons(&tree, &knn, kernel, points, weights, &params.skeleton_config()),
    )?;
    timings.skeletonize = t.elapsed().as_secs_f64();

    Ok(Prepared {
        knn,
        tree,
        skeletons,
        timings,
    })
}

/// Full run: treecode on every point, direct sum on a uniform sample of
/// `target_sample` points.
pub fn run_pipeline(
    points: &PointSet,
    weights: &WeightVector,
    kernel: &KernelSpec,
    params: &PipelineParams,
    knn: Option<KnnGraph>,
) -> Result<PipelineOutput> {
    params.validate()?;
    with_threads(params.threads, || run_inner(points, weights, kernel, params, knn))?
}

fn run_inner(
    points: &PointSet,
    weights: &WeightVector,
    kernel: &KernelSpec,
    params: &PipelineParams,
    knn: Option<KnnGraph>,
) -> Result<PipelineOutput> {
    let Prepared {
        knn,
        tree,
        skeletons,
        mut timings,
    } = prepare(points, weights, kernel, params, knn)?;
    let n = points.len();
    let cfg = params.eval_config();
    let tc = Treecode {
        points,
        weights,
        kernel,
        tree: &tree,
        knn: &knn,
        skeletons: &skeletons,
    };
    let all: Vec<usize> = (0..n).collect();
    let (potentials, stats) = tagged("eval", treecode_eval(&tc, &cfg, &all))?;
    timings.eval = stats.wall_time_secs;

    let sample = sample_indices(n, params.target_sample, phase_seed(params.seed, Phase::Sample));
    let t = Instant::now();
    let exact = tagged(
        "direct",
        direct_sum(points, weights, kernel, &sample, params.include_self),
    )?;
    timings.direct_sample = t.elapsed().as_secs_f64();

    let approx: Vec<f64> = sample.iter().map(|&i| potentials.0[i]).collect();
    let local: Vec<usize> = (0..sample.len()).collect();
    let err = tagged("report", relative_error(&approx, &exact.0, &local))?;

    let direct_time_extrapolated = timings.direct_sample / sample.len() as f64 * n as f64;
    let speedup = if timings.eval > 0.0 {
        direct_time_extrapolated / timings.eval
    } else {
        0.0
    };
    let report = RunReport {
        n,
        d: points.dim(),
        kernel: kernel.name().to_string(),
        params: params.clone(),
        timings,
        relative_error: err,
        sample_size: sample.len(),
        stats,
        tree_nodes: tree.nodes().len(),
        skeletons: skeletons.compressed_count(),
        direct_time_extrapolated,
        speedup,
    };
    Ok(PipelineOutput {
        report,
        potentials,
        sample,
        exact,
        knn,
        tree,
        skeletons,
    })
}
