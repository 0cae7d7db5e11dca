//! `semrsm` subcommands. Each prints a one-line JSON summary on stdout;
//! logs go to stderr.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use semrsm_core::analysis::{correlate_similarity_jsd, CorrelationMethod};
use semrsm_core::batch::center;
use semrsm_core::cka::{cka_layer_matrix_batched, difference};
use semrsm_core::retrieval::{evaluate_retrieval, RetrievalMetric};
use semrsm_core::rsm::{CrossPlan, RsmPlan, SigmaScope};
use semrsm_core::{DenseMatrix, Kernel, Matcher, RepresentationBatch, SigmaPolicy};
use serde_json::{json, Value};

use crate::bench::{bench_matchers, relative_similarity_distribution, write_bench_csv, BenchConfig, BenchSource};
use crate::error::{Error, Result};
use crate::io::{self, MatrixFormat};
use crate::parallel::Pool;

#[derive(Debug, Parser)]
#[command(
    name = "semrsm",
    version,
    about = "Semantic and spatio-semantic representational similarity"
)]
pub struct Cli {
    /// Worker threads (0 or unset: available parallelism).
    #[arg(long, global = true, env = "SEMRSM_THREADS")]
    pub threads: Option<usize>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Square RSM of one representation tensor.
    Rsm(RsmArgs),
    /// CKA layer matrix between two lists of RSMs.
    Cka(CkaArgs),
    /// Rank-1 retrieval of queries against a database.
    Retrieve(RetrieveArgs),
    /// Correlation between pairwise similarity and output-distribution JSD.
    Correlate(CorrelateArgs),
    /// Runtime and quality of matchers against the exact solver.
    Bench(BenchArgs),
    /// Per-pair identity and matcher similarity relative to the optimum.
    Ratios(RatiosArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    Linear,
    Rbf,
    Cosine,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    pub kernel: KernelKind,
    /// Fixed RBF bandwidth instead of the median heuristic.
    #[arg(long)]
    pub sigma: Option<f64>,
}

impl KernelArgs {
    pub fn kernel(&self) -> Result<Kernel> {
        match (self.kernel, self.sigma) {
            (KernelKind::Rbf, Some(s)) => Ok(Kernel::rbf_fixed(s)?),
            (KernelKind::Rbf, None) => Ok(Kernel::Rbf(SigmaPolicy::MedianHeuristic)),
            (_, Some(_)) => Err(Error::Usage("--sigma only applies to --kernel rbf".into())),
            (KernelKind::Linear, None) => Ok(Kernel::Linear),
            (KernelKind::Cosine, None) => Ok(Kernel::Cosine),
        }
    }
}

#[derive(Debug, Args)]
pub struct MatcherArgs {
    /// none | optimal | greedy | topk-greedy[:K] | batch-optimal[:B]
    #[arg(long)]
    pub matcher: String,
    /// K for topk-greedy.
    #[arg(long)]
    pub topk: Option<usize>,
    /// Window size B for batch-optimal.
    #[arg(long, default_value_t = 512)]
    pub batch_size: usize,
}

impl MatcherArgs {
    pub fn matcher(&self) -> Result<Matcher> {
        match self.matcher.trim() {
            "topk-greedy" => match self.topk {
                Some(k) => Ok(Matcher::TopKGreedy { k }),
                None => Err(Error::Usage("topk-greedy needs --topk K".into())),
            },
            "batch-optimal" => Ok(Matcher::BatchOptimal { b: self.batch_size }),
            other => parse_matcher(other),
        }
    }
}

/// Parses `name[:param]`, e.g. `batch-optimal:128`.
pub fn parse_matcher(spec: &str) -> Result<Matcher> {
    let (name, param) = match spec.split_once(':') {
        Some((n, p)) => (n.trim(), Some(p.trim())),
        None => (spec.trim(), None),
    };
    let number = |what: &str| -> Result<usize> {
        let p = param.ok_or_else(|| Error::Usage(format!("{name} needs a {what}, e.g. {name}:64")))?;
        p.parse()
            .map_err(|_| Error::Usage(format!("invalid {what} `{p}` in matcher `{spec}`")))
    };
    let plain = |m: Matcher| match param {
        Some(_) => Err(Error::Usage(format!("matcher `{name}` takes no parameter"))),
        None => Ok(m),
    };
    match name {
        "none" | "identity" => plain(Matcher::None),
        "optimal" => plain(Matcher::Optimal),
        "greedy" => plain(Matcher::Greedy),
        "topk-greedy" => Ok(Matcher::TopKGreedy { k: number("k")? }),
        "batch-optimal" => Ok(Matcher::BatchOptimal {
            b: number("window size")?,
        }),
        _ => Err(Error::Usage(format!(
            "unknown matcher `{spec}` (none, optimal, greedy, topk-greedy:K, batch-optimal:B)"
        ))),
    }
}

#[derive(Debug, Args)]
pub struct RsmArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub matcher: MatcherArgs,
    /// Subtract the per-position sample mean first.
    #[arg(long)]
    pub center: bool,
    /// Accepted for symmetry with `retrieve`; a square RSM already uses
    /// one bandwidth for the whole batch.
    #[arg(long)]
    pub global_sigma: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Output format (default: from the extension, else npy).
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
    /// Write the permutation of every off-diagonal pair as JSON.
    #[arg(long)]
    pub dump_permutations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CkaArgs {
    /// RSM files (n×n, or B×n×n for mini-batches), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub b: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
    /// Another layer matrix of the same shape; writes `this − other`.
    #[arg(long, requires = "diff_out")]
    pub diff: Option<PathBuf>,
    #[arg(long, requires = "diff")]
    pub diff_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    F1,
    Iou,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub database: PathBuf,
    /// JSON map {"id": {"class": count, ...}, ...}
    #[arg(long)]
    pub labels: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub matcher: MatcherArgs,
    /// Length of the ranked list in the report (scoring is rank-1).
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "f1")]
    pub metric: MetricArg,
    /// Skip database entries sharing the query's group id.
    #[arg(long)]
    pub exclude_groups: bool,
    /// Queries × database entries per unit of work.
    #[arg(long, default_value_t = 100)]
    pub block: usize,
    /// One RBF bandwidth over all query × database distances.
    #[arg(long)]
    pub global_sigma: bool,
    /// Keep raw activations (default: subtract the database mean).
    #[arg(long)]
    pub no_center: bool,
    /// Per-query JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the queries × database similarity matrix.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pearson,
    Spearman,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub reps: PathBuf,
    /// N×M probabilities.
    #[arg(long)]
    pub probs: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub matcher: MatcherArgs,
    #[arg(long, value_enum, default_value = "pearson")]
    pub method: MethodArg,
    /// Treat --probs as logits and apply a softmax.
    #[arg(long)]
    pub from_logits: bool,
    /// Report JSD statistics in bits instead of nats (ρ is unaffected).
    #[arg(long)]
    pub log2: bool,
    #[arg(long)]
    pub center: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Gaussian,
    Representations,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    pub channels: usize,
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,
    /// Comma separated matcher specs.
    #[arg(long, default_value = "none,optimal,greedy,batch-optimal:128")]
    pub matchers: String,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub source: SourceArg,
    /// Representation tensor for `--source representations`.
    #[arg(long, required_if_eq("source", "representations"))]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::bench::DEFAULT_WARMUP)]
    pub warmup: usize,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV mirror of the report.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RatiosArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Matcher spec, e.g. batch-optimal:64.
    #[arg(long, default_value = "batch-optimal:512")]
    pub matcher: String,
    #[arg(long)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub center: bool,
    /// JSON with summaries and the raw per-pair ratios.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn maybe_center(z: RepresentationBatch, yes: bool) -> Result<RepresentationBatch> {
    Ok(if yes { center(&z, None)?.0 } else { z })
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn run_rsm(args: &RsmArgs, pool: &Pool) -> Result<Value> {
    let kernel = args.kernel.kernel()?;
    let matcher = args.matcher.matcher()?;
    let z = maybe_center(io::load_representations(&args.input)?, args.center)?;
    log::info!(
        "rsm: N={} C={} S={} kernel={} matcher={}",
        z.n_samples(),
        z.n_channels(),
        z.n_spatial(),
        kernel.name(),
        matcher.label()
    );
    let start = Instant::now();
    let plan = RsmPlan::new(&z, kernel, matcher)?;
    let out = pool.run_rsm(&plan, args.dump_permutations.is_some())?;
    let elapsed = start.elapsed();
    io::save_matrix(&out.matrix, &args.out, MatrixFormat::resolve(args.format, &args.out))?;
    if let Some(path) = &args.dump_permutations {
        let ids = z.ids_or_default();
        let rows: Vec<Value> = out
            .assignments
            .iter()
            .map(|a| {
                json!({
                    "i": ids[a.i], "j": ids[a.j],
                    "permutation": a.permutation, "total_affinity": a.total_affinity,
                })
            })
            .collect();
        io::write_json(path, &rows)?;
    }
    Ok(json!({
        "command": "rsm",
        "n": z.n_samples(),
        "kernel": kernel.name(),
        "sigma": plan.kernel().sigma(),
        "matcher": matcher.label(),
        "threads": pool.threads(),
        "wall_time_s": elapsed.as_secs_f64(),
        "out": args.out,
    }))
}

fn grid_stats(g: &DenseMatrix) -> Value {
    let vals: Vec<f64> = g.values().iter().copied().filter(|v| v.is_finite()).collect();
    if vals.is_empty() {
        return json!({"min": null, "max": null, "mean": null, "undefined": g.values().len()});
    }
    json!({
        "min": vals.iter().copied().fold(f64::INFINITY, f64::min),
        "max": vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "mean": vals.iter().sum::<f64>() / vals.len() as f64,
        "undefined": g.values().len() - vals.len(),
    })
}

fn run_cka(args: &CkaArgs, pool: &Pool) -> Result<Value> {
    let load =
        |paths: &[PathBuf]| -> Result<Vec<Vec<DenseMatrix>>> { paths.iter().map(io::load_rsm_batches).collect() };
    let (a, b) = (load(&args.a)?, load(&args.b)?);
    let grid = pool.install(|| cka_layer_matrix_batched(&a, &b))?;
    io::save_grid(&grid, &args.out, MatrixFormat::resolve(args.format, &args.out))?;
    let mut summary = json!({
        "command": "cka",
        "shape": [grid.rows(), grid.cols()],
        "cka": grid_stats(&grid),
        "out": args.out,
    });
    if let (Some(other), Some(diff_out)) = (&args.diff, &args.diff_out) {
        let other = io::load_grid(other)?;
        let diff = difference(&grid, &other)?;
        io::save_grid(&diff, diff_out, MatrixFormat::resolve(args.format, diff_out))?;
        summary["difference"] = grid_stats(&diff);
        summary["diff_out"] = json!(diff_out);
    }
    Ok(summary)
}

fn run_retrieve(args: &RetrieveArgs, pool: &Pool) -> Result<Value> {
    let kernel = args.kernel.kernel()?;
    let matcher = args.matcher.matcher()?;
    if args.k == 0 {
        return Err(Error::Usage("--k must be at least 1".into()));
    }
    let (mut q, mut d) = (
        io::load_representations(&args.queries)?,
        io::load_representations(&args.database)?,
    );
    if !args.no_center {
        let (dc, mean) = center(&d, None)?;
        q = center(&q, Some(&mean))?.0;
        d = dc;
    }
    let labels = io::load_labels(&args.labels)?;
    let scope = if args.global_sigma {
        SigmaScope::Global
    } else {
        SigmaScope::PerBlock
    };
    let plan = CrossPlan::new(&q, &d, kernel, matcher, args.block, scope)?;
    let sim = pool.run_cross(&plan)?;
    if let Some(path) = &args.matrix_out {
        io::save_matrix(&sim, path, MatrixFormat::resolve(None, path))?;
    }
    let groups = if args.exclude_groups {
        match (q.group_ids(), d.group_ids()) {
            (Some(qg), Some(dg)) => Some((qg, dg)),
            _ => {
                return Err(semrsm_core::Error::Validation(
                    "--exclude-groups needs group_ids in both sidecar files".into(),
                )
                .into())
            }
        }
    } else {
        None
    };
    let metric = match args.metric {
        MetricArg::F1 => RetrievalMetric::F1,
        MetricArg::Iou => RetrievalMetric::Iou,
    };
    let report = evaluate_retrieval(&sim, &labels, args.k, metric, groups)?;
    let mean_key = format!("mean_{}@1", metric.name());
    if let Some(path) = &args.out {
        let mut rows: Vec<_> = report.queries.iter().collect();
        rows.sort_by(|x, y| x.retrieval.query_id.cmp(&y.retrieval.query_id));
        let rows: Vec<Value> = rows
            .into_iter()
            .map(|qe| {
                json!({
                    "query_id": qe.retrieval.query_id,
                    "retrieved": qe.retrieval.ranked_ids,
                    "scores": qe.retrieval.scores,
                    "short": qe.retrieval.short,
                    metric.name(): qe.metric,
                })
            })
            .collect();
        io::write_json(
            path,
            &json!({"metric": metric.name(), "k": args.k, &mean_key: report.mean, "queries": rows}),
        )?;
    }
    let mut summary = json!({
        "command": "retrieve",
        "n_queries": sim.rows(),
        "n_database": sim.cols(),
        "kernel": kernel.name(),
        "matcher": matcher.label(),
        "metric": metric.name(),
        "k": args.k,
    });
    summary[mean_key] = json!(report.mean);
    Ok(summary)
}

fn run_correlate(args: &CorrelateArgs, pool: &Pool) -> Result<Value> {
    let kernel = args.kernel.kernel()?;
    let matcher = args.matcher.matcher()?;
    let z = maybe_center(io::load_representations(&args.reps)?, args.center)?;
    let probs = io::load_probabilities(&args.probs, args.from_logits)?;
    let plan = RsmPlan::new(&z, kernel, matcher)?;
    let sim = pool.run_rsm(&plan, false)?.matrix;
    let method = match args.method {
        MethodArg::Pearson => CorrelationMethod::Pearson,
        MethodArg::Spearman => CorrelationMethod::Spearman,
    };
    let result = correlate_similarity_jsd(&sim.values, &probs, method)?;
    let scale = if args.log2 { std::f64::consts::LOG2_E } else { 1.0 };
    let summary = json!({
        "command": "correlate",
        "method": method.name(),
        "rho": result.rho,
        "n_pairs": result.n_pairs,
        "n_samples": result.n_samples,
        "kernel": kernel.name(),
        "matcher": matcher.label(),
        "jsd_unit": if args.log2 { "bits" } else { "nats" },
        "mean_jsd": result.mean_jsd * scale,
        "median_jsd": result.median_jsd * scale,
    });
    if result.rho.is_none() {
        log::warn!("correlation undefined: similarity or JSD has zero variance");
    }
    if let Some(path) = &args.out {
        io::write_json(path, &summary)?;
    }
    Ok(summary)
}

fn run_bench(args: &BenchArgs) -> Result<Value> {
    let matchers = args
        .matchers
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(parse_matcher)
        .collect::<Result<Vec<_>>>()?;
    if matchers.is_empty() || args.sizes.is_empty() {
        return Err(Error::Usage("--sizes and --matchers must not be empty".into()));
    }
    let source = match (args.source, &args.input) {
        (SourceArg::Gaussian, _) => BenchSource::Gaussian,
        (SourceArg::Representations, Some(path)) => BenchSource::Representations(io::load_representations(path)?),
        (SourceArg::Representations, None) => {
            return Err(Error::Usage("--source representations needs --input".into()))
        }
    };
    let config = BenchConfig {
        sizes: args.sizes.clone(),
        channels: args.channels,
        pairs: args.pairs,
        matchers,
        seed: args.seed,
        warmup: args.warmup,
    };
    let report = bench_matchers(&config, &source)?;
    if let Some(path) = &args.out {
        io::write_json(path, &report)?;
    }
    if let Some(path) = &args.csv {
        write_bench_csv(&report, path)?;
    }
    let cells: Vec<Value> = report
        .cells
        .iter()
        .map(|c| {
            json!({
                "S": c.s, "matcher": c.matcher, "params": c.params,
                "mean_ratio": finite_or_null(c.mean_ratio), "median_time_ns": c.median_time_ns,
            })
        })
        .collect();
    Ok(json!({"command": "bench", "seed": args.seed, "pairs": args.pairs, "cells": cells}))
}

fn run_ratios(args: &RatiosArgs, pool: &Pool) -> Result<Value> {
    let matcher = parse_matcher(&args.matcher)?;
    let z = maybe_center(io::load_representations(&args.input)?, args.center)?;
    let dist = pool.install(|| relative_similarity_distribution(&z, matcher, args.pairs, args.seed))?;
    if let Some(path) = &args.out {
        let mut full = serde_json::to_value(&dist).map_err(|e| Error::Format(e.to_string()))?;
        full["identity_ratios"] = json!(dist.identity_ratios);
        full["matcher_ratios"] = json!(dist.matcher_ratios);
        io::write_json(path, &full)?;
    }
    let mut summary = serde_json::to_value(&dist).map_err(|e| Error::Format(e.to_string()))?;
    summary["command"] = json!("ratios");
    Ok(summary)
}

pub fn run(cli: &Cli) -> Result<Value> {
    let pool = Pool::new(cli.threads)?;
    match &cli.command {
        Command::Rsm(a) => run_rsm(a, &pool),
        Command::Cka(a) => run_cka(a, &pool),
        Command::Retrieve(a) => run_retrieve(a, &pool),
        Command::Correlate(a) => run_correlate(a, &pool),
        Command::Bench(a) => run_bench(a),
        Command::Ratios(a) => run_ratios(a, &pool),
    }
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses `args`, runs the command and prints the summary. Returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
