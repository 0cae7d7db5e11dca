//! Matcher benchmarks: per-solve wall time and quality relative to the
//! exact optimum, plus per-pair ratio distributions on real batches.

use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use semrsm_core::assignment::{affinity, solve_identity, solve_optimal, AffinityMatrix};
use semrsm_core::{Matcher, RepresentationBatch};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const DEFAULT_WARMUP: usize = 3;

#[derive(Debug, Clone)]
pub enum BenchSource {
    /// I.i.d. standard normal activations.
    Gaussian,
    /// Random sample pairs and a random subset of `S` locations of a batch.
    Representations(RepresentationBatch),
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub channels: usize,
    pub pairs: usize,
    pub matchers: Vec<Matcher>,
    pub seed: u64,
    pub warmup: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchCell {
    #[serde(rename = "S")]
    pub s: usize,
    pub matcher: String,
    pub params: Value,
    pub mean_time_ns: f64,
    pub median_time_ns: f64,
    /// Mean of `k / k_opt` over pairs with a positive optimum; NaN (null) if none.
    pub mean_ratio: f64,
    pub n_pairs: usize,
    pub n_degenerate: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub cells: Vec<BenchCell>,
}

pub fn matcher_params(m: &Matcher) -> Value {
    match *m {
        Matcher::TopKGreedy { k } => json!({ "k": k }),
        Matcher::BatchOptimal { b } => json!({ "b": b }),
        _ => json!({}),
    }
}

/// Independent stream per spatial size, so adding a size does not change
/// the instances of the others.
fn rng_for(seed: u64, s: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Affinity matrices of `pairs` seeded instances of size `s`.
fn instances(source: &BenchSource, s: usize, channels: usize, pairs: usize, seed: u64) -> Result<Vec<AffinityMatrix>> {
    let mut rng = rng_for(seed, s);
    match source {
        BenchSource::Gaussian => (0..pairs)
            .map(|_| {
                let zi = gaussian(&mut rng, channels * s);
                let zj = gaussian(&mut rng, channels * s);
                Ok(affinity(&zi, &zj, channels, s)?)
            })
            .collect(),
        BenchSource::Representations(z) => {
            if s > z.n_spatial() {
                return Err(semrsm_core::Error::InvalidParameter(format!(
                    "representations have {} spatial locations, cannot benchmark S={s}",
                    z.n_spatial()
                ))
                .into());
            }
            if z.n_samples() < 2 {
                return Err(semrsm_core::Error::TooFewSamples {
                    needed: 2,
                    got: z.n_samples(),
                }
                .into());
            }
            let mut locs = sample_indices(&mut rng, z.n_spatial(), s).into_vec();
            locs.sort_unstable();
            let sub = z.select_spatial(&locs)?;
            let c = sub.n_channels();
            (0..pairs)
                .map(|_| {
                    let i = rng.random_range(0..sub.n_samples());
                    let mut j = rng.random_range(0..sub.n_samples() - 1);
                    if j >= i {
                        j += 1;
                    }
                    Ok(affinity(sub.sample(i), sub.sample(j), c, s)?)
                })
                .collect()
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Linear interpolation between order statistics (`p` in percent).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = p / 100.0 * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Runs every matcher on the same instances. Solves are strictly
/// sequential on the calling thread; the reference optimum is not timed.
pub fn bench_matchers(config: &BenchConfig, source: &BenchSource) -> Result<BenchReport> {
    if config.pairs == 0 {
        return Err(Error::Usage("--pairs must be at least 1".into()));
    }
    let channels = match source {
        BenchSource::Gaussian => config.channels,
        BenchSource::Representations(z) => z.n_channels(),
    };
    let mut cells = Vec::with_capacity(config.sizes.len() * config.matchers.len());
    for &s in &config.sizes {
        for m in &config.matchers {
            m.validate_for(s)?;
        }
        let problems = instances(source, s, channels, config.pairs, config.seed)?;
        let optima: Vec<f64> = problems.iter().map(|a| solve_optimal(a).total_affinity).collect();
        for m in &config.matchers {
            for a in problems.iter().cycle().take(config.warmup) {
                std::hint::black_box(m.solve(a)?);
            }
            let mut times = Vec::with_capacity(problems.len());
            let mut ratios = Vec::with_capacity(problems.len());
            for (a, &opt) in problems.iter().zip(&optima) {
                let start = Instant::now();
                let result = m.solve(a)?;
                times.push(start.elapsed().as_nanos() as f64);
                if opt > 0.0 {
                    ratios.push(result.total_affinity / opt);
                }
            }
            let n_degenerate = problems.len() - ratios.len();
            log::debug!(
                "S={s} {}: {} pairs, {n_degenerate} degenerate",
                m.label(),
                problems.len()
            );
            times.sort_by(f64::total_cmp);
            cells.push(BenchCell {
                s,
                matcher: m.name().into(),
                params: matcher_params(m),
                mean_time_ns: mean(&times),
                median_time_ns: percentile(&times, 50.0),
                mean_ratio: mean(&ratios),
                n_pairs: problems.len(),
                n_degenerate,
                seed: config.seed,
            });
        }
    }
    Ok(BenchReport { cells })
}

/// CSV mirror of the JSON report; `params` is rendered as `k=..`/`b=..`.
pub fn write_bench_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "S",
        "matcher",
        "params",
        "mean_time_ns",
        "median_time_ns",
        "mean_ratio",
        "n_pairs",
        "n_degenerate",
        "seed",
    ])?;
    for c in &report.cells {
        let params = c
            .params
            .as_object()
            .map(|o| o.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        w.write_record([
            c.s.to_string(),
            c.matcher.clone(),
            params,
            c.mean_time_ns.to_string(),
            c.median_time_ns.to_string(),
            c.mean_ratio.to_string(),
            c.n_pairs.to_string(),
            c.n_degenerate.to_string(),
            c.seed.to_string(),
        ])?;
    }
    w.flush().map_err(Error::io(path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSummary {
    pub mean: f64,
    pub std: f64,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl RatioSummary {
    /// `None` for an empty sample. `std` is the population deviation.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = mean(&sorted);
        let var = sorted.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / sorted.len() as f64;
        Some(RatioSummary {
            mean: m,
            std: var.sqrt(),
            p5: percentile(&sorted, 5.0),
            p25: percentile(&sorted, 25.0),
            p50: percentile(&sorted, 50.0),
            p75: percentile(&sorted, 75.0),
            p95: percentile(&sorted, 95.0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioDistribution {
    pub matcher: String,
    pub params: Value,
    pub n_pairs: usize,
    pub n_degenerate: usize,
    pub seed: u64,
    /// `k_identity / k_opt` per pair.
    pub identity: Option<RatioSummary>,
    /// `k_matcher / k_opt` per pair.
    pub matched: Option<RatioSummary>,
    #[serde(skip)]
    pub identity_ratios: Vec<f64>,
    #[serde(skip)]
    pub matcher_ratios: Vec<f64>,
}

/// Samples `pairs` distinct unordered pairs of `z` and reports how far the
/// identity alignment and `matcher` fall short of the optimum, in linear
/// similarity. Pairs with a non-positive optimum are skipped and counted.
pub fn relative_similarity_distribution(
    z: &RepresentationBatch,
    matcher: Matcher,
    pairs: usize,
    seed: u64,
) -> Result<RatioDistribution> {
    let n = z.n_samples();
    let available = n * n.saturating_sub(1) / 2;
    if pairs == 0 || pairs > available {
        return Err(semrsm_core::Error::InvalidParameter(format!(
            "need 1 <= pairs <= N(N-1)/2 = {available}, got {pairs}"
        ))
        .into());
    }
    matcher.validate_for(z.n_spatial())?;
    let all = semrsm_core::rsm::upper_triangle(n);
    let off_diagonal: Vec<(usize, usize)> = all.into_iter().filter(|&(i, j)| i != j).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = sample_indices(&mut rng, off_diagonal.len(), pairs).into_vec();
    chosen.sort_unstable();

    let (c, s) = (z.n_channels(), z.n_spatial());
    let mut identity_ratios = Vec::with_capacity(pairs);
    let mut matcher_ratios = Vec::with_capacity(pairs);
    for idx in chosen {
        let (i, j) = off_diagonal[idx];
        let a = affinity(z.sample(i), z.sample(j), c, s)?;
        let opt = solve_optimal(&a).total_affinity;
        if opt <= 0.0 {
            continue;
        }
        identity_ratios.push(solve_identity(&a).total_affinity / opt);
        matcher_ratios.push(matcher.solve(&a)?.total_affinity / opt);
    }
    Ok(RatioDistribution {
        matcher: matcher.name().into(),
        params: matcher_params(&matcher),
        n_pairs: identity_ratios.len(),
        n_degenerate: pairs - identity_ratios.len(),
        seed,
        identity: RatioSummary::of(&identity_ratios),
        matched: RatioSummary::of(&matcher_ratios),
        identity_ratios,
        matcher_ratios,
    })
}
