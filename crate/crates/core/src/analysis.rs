//! Output-distribution similarity (Jensen–Shannon divergence, in nats) and
//! its correlation with representational similarity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::kernels::median_in_place;
use crate::matrix::DenseMatrix;

const SUM_TOLERANCE: f64 = 1e-4;

/// A discrete distribution: non-negative entries summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Validates and renormalises; sums further than `1e-4` from 1 are rejected.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Validation("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Validation(format!("invalid probability {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Validation(format!("probabilities sum to {sum}, expected 1")));
        }
        probs.iter_mut().for_each(|p| *p /= sum);
        Ok(ProbabilityVector(probs))
    }

    /// Numerically stable softmax of a logit vector.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.is_empty() || logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Validation("logits must be non-empty and finite".into()));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
        let sum: f64 = exps.iter().sum();
        Ok(ProbabilityVector(exps.into_iter().map(|e| e / sum).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `Σ P(i) ln(P(i)/Q(i))`; `+∞` when `P(i) > 0` and `Q(i) = 0`.
pub fn kl_divergence(p: &ProbabilityVector, q: &ProbabilityVector) -> Result<f64> {
    check_len(p.len(), q.len())?;
    Ok(kl_raw(p.as_slice(), q.as_slice()))
}

fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        total += pi * libm::log(pi / qi);
    }
    total
}

/// `½ KL(P‖M) + ½ KL(Q‖M)` with `M = (P + Q)/2`; bounded by `ln 2`.
pub fn jsd(p: &ProbabilityVector, q: &ProbabilityVector) -> Result<f64> {
    check_len(p.len(), q.len())?;
    let m: Vec<f64> = p
        .as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    // Rounding can push tiny negative values out of the sum.
    Ok((0.5 * kl_raw(p.as_slice(), &m) + 0.5 * kl_raw(q.as_slice(), &m)).max(0.0))
}

/// Symmetric matrix of pairwise JSDs.
pub fn pairwise_jsd(probs: &[ProbabilityVector]) -> Result<DenseMatrix> {
    let n = probs.len();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = jsd(&probs[i], &probs[j])?;
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}

/// Product-moment correlation; `Ok(None)` when either input has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    check_len(xs.len(), ys.len())?;
    if xs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0)))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of the average-rank vectors.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    check_len(xs.len(), ys.len())?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

impl CorrelationMethod {
    pub fn name(self) -> &'static str {
        match self {
            CorrelationMethod::Pearson => "pearson",
            CorrelationMethod::Spearman => "spearman",
        }
    }

    pub fn apply(self, xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
        match self {
            CorrelationMethod::Pearson => pearson(xs, ys),
            CorrelationMethod::Spearman => spearman(xs, ys),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityJsdCorrelation {
    pub rho: Option<f64>,
    pub n_pairs: usize,
    pub n_samples: usize,
    pub method: CorrelationMethod,
    /// Mean and median pairwise JSD, for context.
    pub mean_jsd: f64,
    pub median_jsd: f64,
}

/// Correlates the strict upper triangle of `sim` with the matching pairwise
/// JSDs. Negative values mean similar representations go with similar
/// predictions.
pub fn correlate_similarity_jsd(
    sim: &DenseMatrix,
    probs: &[ProbabilityVector],
    method: CorrelationMethod,
) -> Result<SimilarityJsdCorrelation> {
    if !sim.is_square() {
        return Err(Error::Shape(format!(
            "similarity matrix must be square, got {}×{}",
            sim.rows(),
            sim.cols()
        )));
    }
    let n = sim.rows();
    check_len(n, probs.len())?;
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let n_pairs = n * (n - 1) / 2;
    let mut sims = Vec::with_capacity(n_pairs);
    let mut divs = Vec::with_capacity(n_pairs);
    for i in 0..n {
        for j in i + 1..n {
            sims.push(sim.get(i, j));
            divs.push(jsd(&probs[i], &probs[j])?);
        }
    }
    let rho = method.apply(&sims, &divs)?;
    let mean_jsd = divs.iter().sum::<f64>() / n_pairs as f64;
    let median_jsd = median_in_place(&mut divs);
    Ok(SimilarityJsdCorrelation {
        rho,
        n_pairs,
        n_samples: n,
        method,
        mean_jsd,
        median_jsd,
    })
}
