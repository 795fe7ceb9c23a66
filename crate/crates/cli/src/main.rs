//! `treesum`: fast kernel summation from the command line.

mod config;

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use treesum_core::dataset::{self, Embedding};
use treesum_core::io::{self as tio, PointFormat};
use treesum_core::pipeline::{build_knn, with_threads, PipelineParams, RunReport};
use treesum_core::report::{csv_header, emit_report, parse_json_report, ReportFormat};
use treesum_core::{direct_sum, knn_exact, KernelSpec, KnnGraph, PointSet, SplitRule, WeightVector};

#[derive(Parser)]
#[command(name = "treesum", version, about = "Treecode kernel summation with neighbor pruning")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset on a low-dimensional manifold.
    Gen(GenArgs),
    /// Build an approximate (or exact) neighbor graph and cache it.
    Knn(KnnArgs),
    /// Run the full pipeline and report accuracy and timings.
    Run(RunConfig),
    /// Exact direct sum on a subset of targets.
    Direct(DirectArgs),
    /// Re-render a JSON report.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Bin,
    Csv,
}

impl From<FormatArg> for PointFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Bin => PointFormat::Bin,
            FormatArg::Csv => PointFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbeddingArg {
    Nonlinear,
    Linear,
    Identity,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    GaussianFixed,
    GaussianVariable,
    LaplaceReciprocal,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    MedianProjection,
    WidestCoordinate,
    FarthestPair,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormatArg {
    Json,
    Csv,
    Human,
}

impl From<ReportFormatArg> for ReportFormat {
    fn from(f: ReportFormatArg) -> Self {
        match f {
            ReportFormatArg::Json => ReportFormat::Json,
            ReportFormatArg::Csv => ReportFormat::CsvRow,
            ReportFormatArg::Human => ReportFormat::Human,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "d")]
    d_ambient: usize,
    #[arg(long = "intrinsic-dim")]
    d_intrinsic: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, value_enum, default_value = "nonlinear")]
    embedding: EmbeddingArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "bin")]
    format: FormatArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Point file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "bin")]
    format: FormatArg,
    /// Ambient dimension; required for binary input.
    #[arg(long)]
    d: Option<usize>,
}

impl InputArgs {
    fn load(&self) -> Result<PointSet> {
        tio::read_points(&self.input, self.format.into(), self.d)
            .with_context(|| format!("reading points from {}", self.input.display()))
    }
}

#[derive(Args, Clone)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "gaussian-fixed")]
    kernel: KernelArg,
    /// Fixed bandwidth; defaults to the median pairwise distance of a
    /// 1000-point subsample.
    #[arg(long)]
    sigma: Option<f64>,
    /// Per-source bandwidths, one per line (gaussian-variable).
    #[arg(long)]
    sigma_file: Option<PathBuf>,
    /// Regularizer of the reciprocal kernel.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Weights, one per line; standard normal weights when absent.
    #[arg(long)]
    weights: Option<PathBuf>,
}

impl KernelArgs {
    fn kernel(&self, points: &PointSet, seed: u64) -> Result<KernelSpec> {
        Ok(match self.kernel {
            KernelArg::GaussianFixed => {
                let sigma = match self.sigma {
                    Some(s) => s,
                    None => dataset::median_pairwise_distance(points, 1000, seed)?,
                };
                KernelSpec::gaussian(sigma)?
            }
            KernelArg::GaussianVariable => {
                let path = self
                    .sigma_file
                    .as_ref()
                    .context("gaussian-variable needs --sigma-file")?;
                let sigmas = tio::read_values_file(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let k = KernelSpec::gaussian_variable(sigmas)?;
                k.validate(Some(points.len()))?;
                k
            }
            KernelArg::LaplaceReciprocal => KernelSpec::laplace(self.epsilon)?,
        })
    }

    fn weights(&self, points: &PointSet, seed: u64) -> Result<WeightVector> {
        let w = match &self.weights {
            Some(path) => WeightVector::new(
                tio::read_values_file(path).with_context(|| format!("reading {}", path.display()))?,
            )?,
            None => dataset::normal_weights(points.len(), seed),
        };
        w.check_len(points)?;
        Ok(w)
    }
}

#[derive(Args)]
struct KnnArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 32)]
    k: usize,
    #[arg(long, default_value_t = 8)]
    num_trees: usize,
    #[arg(long, default_value_t = 128)]
    ann_leaf_size: usize,
    /// Brute-force exact neighbors instead of random projection trees.
    #[arg(long)]
    exact: bool,
    /// Same seed as `run --seed`, so the graph matches the one a run builds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

/// Every tunable of a pipeline run.
#[derive(Args)]
struct RunConfig {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value_t = 32)]
    k: usize,
    #[arg(long, default_value_t = 8)]
    num_trees: usize,
    #[arg(long, default_value_t = 128)]
    ann_leaf_size: usize,
    #[arg(long, default_value_t = 128)]
    leaf_capacity: usize,
    #[arg(long, value_enum, default_value = "median-projection")]
    split_rule: SplitArg,
    /// Skeleton size `s`.
    #[arg(long, default_value_t = 64)]
    skeleton_size: usize,
    #[arg(long, default_value_t = 64)]
    uniform_samples: usize,
    /// Cap on nearest-neighbor sample rows per node (default 4 s).
    #[arg(long)]
    max_neighbor_rows: Option<usize>,
    /// Nodes above this level are never compressed (default: nodes owning
    /// more than half of the points).
    #[arg(long)]
    min_skeleton_level: Option<usize>,
    /// Neighbors per target that must stay in the near field (default k).
    #[arg(long)]
    k_prune: Option<usize>,
    /// Leave `j == i` out of every sum.
    #[arg(long)]
    exclude_self: bool,
    /// Targets checked against the direct sum.
    #[arg(long, default_value_t = 1000)]
    target_sample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Neighbor graph file; built and written here when missing.
    #[arg(long)]
    knn_cache: Option<PathBuf>,
    /// Treecode potentials for all points (binary f64).
    #[arg(long)]
    potentials_out: Option<PathBuf>,
    /// Sampled target indices, one per line.
    #[arg(long)]
    sample_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "human")]
    report_format: ReportFormatArg,
    /// Report destination; CSV rows are appended, with a header for a new
    /// file.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

impl RunConfig {
    fn params(&self) -> PipelineParams {
        PipelineParams {
            k: self.k,
            num_trees: self.num_trees,
            ann_leaf_size: self.ann_leaf_size,
            leaf_capacity: self.leaf_capacity,
            split_rule: match self.split_rule {
                SplitArg::MedianProjection => SplitRule::MedianProjection,
                SplitArg::WidestCoordinate => SplitRule::WidestCoordinate,
                SplitArg::FarthestPair => SplitRule::FarthestPair,
            },
            skeleton_size: self.skeleton_size,
            uniform_samples: self.uniform_samples,
            max_neighbor_rows: self.max_neighbor_rows,
            min_skeleton_level: self.min_skeleton_level,
            k_prune: self.k_prune,
            include_self: !self.exclude_self,
            target_sample: self.target_sample,
            seed: self.seed,
            threads: self.threads,
        }
    }
}

#[derive(Args)]
struct DirectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Number of uniformly sampled targets; all points when absent.
    #[arg(long, conflicts_with = "indices")]
    targets: Option<usize>,
    /// Target indices, one per line.
    #[arg(long)]
    indices: Option<PathBuf>,
    #[arg(long)]
    exclude_self: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Potentials of the targets, in target order (binary f64).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON report written by `run`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "human")]
    format: ReportFormatArg,
    /// Prefix CSV output with its header line.
    #[arg(long)]
    header: bool,
}

fn write_f64_file(path: &Path, values: &[f64]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    tio::write_f64_le(BufWriter::new(f), values)?;
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let embedding = match a.embedding {
        EmbeddingArg::Nonlinear => Embedding::Nonlinear,
        EmbeddingArg::Linear => Embedding::Linear,
        EmbeddingArg::Identity => Embedding::Identity,
    };
    let pts = dataset::generate_manifold_dataset(a.n, a.d_ambient, a.d_intrinsic, a.noise, embedding, a.seed)?;
    tio::write_points(&a.out, a.format.into(), &pts)?;
    eprintln!("wrote {} points in {} dimensions to {}", pts.len(), pts.dim(), a.out.display());
    Ok(())
}

fn cmd_knn(a: KnnArgs) -> Result<()> {
    let pts = a.input.load()?;
    let g = with_threads(a.threads, || {
        if a.exact {
            knn_exact(&pts, a.k)
        } else {
            let params = PipelineParams {
                k: a.k,
                num_trees: a.num_trees,
                ann_leaf_size: a.ann_leaf_size,
                seed: a.seed,
                ..PipelineParams::default()
            };
            build_knn(&pts, &params)
        }
    })??;
    let f = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    g.write_to(BufWriter::new(f))?;
    eprintln!("wrote {}-NN graph for {} points to {}", g.k(), g.n(), a.out.display());
    Ok(())
}

fn cmd_run(cfg: RunConfig) -> Result<()> {
    let pts = cfg.input.load()?;
    let kernel = cfg.kernel.kernel(&pts, cfg.seed)?;
    let weights = cfg.kernel.weights(&pts, cfg.seed)?;
    let params = cfg.params();

    let cached = match &cfg.knn_cache {
        Some(path) if path.exists() => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Some(KnnGraph::read_from(BufReader::new(f)).context("loading neighbor cache")?)
        }
        _ => None,
    };
    let had_cache = cached.is_some();
    let out = treesum_core::run_pipeline(&pts, &weights, &kernel, &params, cached)?;
    if let (Some(path), false) = (&cfg.knn_cache, had_cache) {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        out.knn.write_to(BufWriter::new(f))?;
    }
    if let Some(path) = &cfg.potentials_out {
        write_f64_file(path, out.potentials.as_slice())?;
    }
    if let Some(path) = &cfg.sample_out {
        let idx: Vec<String> = out.sample.iter().map(|i| i.to_string()).collect();
        fs::write(path, idx.join("\n") + "\n")?;
    }
    emit(&out.report, cfg.report_format.into(), cfg.report_out.as_deref())
}

fn emit(report: &RunReport, format: ReportFormat, dest: Option<&Path>) -> Result<()> {
    let text = emit_report(report, format)?;
    match (dest, format) {
        (Some(path), ReportFormat::CsvRow) => {
            let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            if fresh {
                f.write_all(csv_header().as_bytes())?;
            }
            f.write_all(text.as_bytes())?;
        }
        (Some(path), _) => fs::write(path, text)?,
        (None, ReportFormat::CsvRow) => print!("{}{text}", csv_header()),
        (None, _) => print!("{text}"),
    }
    Ok(())
}

fn cmd_direct(a: DirectArgs) -> Result<()> {
    let pts = a.input.load()?;
    let kernel = a.kernel.kernel(&pts, a.seed)?;
    let weights = a.kernel.weights(&pts, a.seed)?;
    let targets: Vec<usize> = match (&a.indices, a.targets) {
        (Some(path), _) => fs::read_to_string(path)?
            .split_whitespace()
            .map(|t| t.parse::<usize>().with_context(|| format!("bad index '{t}'")))
            .collect::<Result<_>>()?,
        (None, Some(count)) => dataset::sample_indices(pts.len(), count, a.seed),
        (None, None) => (0..pts.len()).collect(),
    };
    let u = with_threads(a.threads, || {
        direct_sum(&pts, &weights, &kernel, &targets, !a.exclude_self)
    })??;
    write_f64_file(&a.out, u.as_slice())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let report = parse_json_report(&text).context("parsing JSON report")?;
    let format: ReportFormat = a.format.into();
    if a.header && format == ReportFormat::CsvRow {
        print!("{}", csv_header());
    }
    print!("{}", emit_report(&report, format)?);
    Ok(())
}

fn main() -> Result<()> {
    let args = config::expand_config_args(std::env::args_os().collect())?;
    let cli = Cli::parse_from(args);
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Knn(a) => cmd_knn(a),
        Command::Run(c) => cmd_run(c),
        Command::Direct(a) => cmd_direct(a),
        Command::Report(a) => cmd_report(a),
    }
}
