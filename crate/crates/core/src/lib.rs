//! Kernel summation `u_i = sum_j K(x_i, x_j) w_j` for points in high
//! dimensions.
//!
//! The treecode splits every target's sum into a near field, summed
//! exactly, and a far field represented by per-node skeletons:
//!
//! 1. [`ann`] builds an approximate k-nearest-neighbor graph with random
//!    projection trees.
//! 2. [`spacetree`] partitions the points into a binary tree.
//! 3. [`skeleton`] compresses every node bottom-up with interpolative
//!    decompositions ([`id`]) of sampled kernel blocks.
//! 4. [`evaluator`] descends the tree per target and prunes a node exactly
//!    when it contains none of the target's nearest neighbors.
//!
//! [`evaluator::direct_sum`] is the exact reference and
//! [`pipeline::run_pipeline`] strings the phases together.

pub mod ann;
pub mod data;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod id;
pub mod io;
pub mod kernel;
pub mod pipeline;
pub mod report;
mod rng;
pub mod skeleton;
pub mod spacetree;

pub use ann::{knn_exact, knn_greedy, KnnGraph};
pub use data::{PointSet, PotentialVector, WeightVector};
pub use error::{Error, Result};
pub use evaluator::{direct_sum, relative_error, treecode_eval, EvalConfig, EvalStats, Treecode};
pub use kernel::KernelSpec;
pub use pipeline::{run_pipeline, PipelineOutput, PipelineParams, RunReport};
pub use skeleton::{build_all_skeletons, SkeletonConfig, SkeletonSet};
pub use spacetree::{SpaceTree, SplitRule};
