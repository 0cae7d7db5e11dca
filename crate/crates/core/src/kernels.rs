//! Similarity kernels between flattened representation vectors and the
//! median-distance bandwidth heuristic for the RBF kernel.
//!
//! The RBF bandwidth is `σ = sqrt(median pairwise Euclidean distance)`,
//! taken over whatever set of vectors forms one RSM block. When RSMs are
//! computed block-wise (query × database mini-batches) each block gets its
//! own σ, so RBF values are not strictly comparable across blocks; linear
//! and cosine kernels do not have this problem.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

/// How the RBF bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaPolicy {
    MedianHeuristic,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    Rbf(SigmaPolicy),
    Cosine,
}

impl Kernel {
    pub fn rbf_fixed(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Kernel::Rbf(SigmaPolicy::Fixed(sigma)))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Rbf(_) => "rbf",
            Kernel::Cosine => "cosine",
        }
    }

    /// Fixes the bandwidth (if any) so the kernel can be evaluated.
    /// `sigma_source` is only consulted for the median heuristic.
    pub fn resolve(&self, sigma_source: impl FnOnce() -> Result<f64>) -> Result<ResolvedKernel> {
        Ok(match *self {
            Kernel::Linear => ResolvedKernel::Linear,
            Kernel::Cosine => ResolvedKernel::Cosine,
            Kernel::Rbf(SigmaPolicy::Fixed(sigma)) => {
                check_sigma(sigma)?;
                ResolvedKernel::Rbf { sigma }
            }
            Kernel::Rbf(SigmaPolicy::MedianHeuristic) => ResolvedKernel::Rbf { sigma: sigma_source()? },
        })
    }
}

/// A kernel with every parameter fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedKernel {
    Linear,
    Rbf { sigma: f64 },
    Cosine,
}

impl ResolvedKernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match *self {
            ResolvedKernel::Linear => linear_kernel(x, y),
            ResolvedKernel::Rbf { sigma } => rbf_kernel(x, y, sigma),
            ResolvedKernel::Cosine => cosine_kernel(x, y),
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match *self {
            ResolvedKernel::Rbf { sigma } => Some(sigma),
            _ => None,
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "RBF sigma must be positive and finite, got {sigma}"
        )))
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn linear_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    Ok(dot(x, y))
}

/// `exp(-‖x − y‖² / (2σ²))`.
pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    check_len(x.len(), y.len())?;
    check_sigma(sigma)?;
    Ok(libm::exp(-squared_distance(x, y) / (2.0 * sigma * sigma)))
}

/// Cosine similarity. A zero vector has similarity 0 with anything except
/// another zero vector, where it is 1.
pub fn cosine_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    let nx = libm::sqrt(dot(x, x));
    let ny = libm::sqrt(dot(y, y));
    Ok(match (nx == 0.0, ny == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => dot(x, y) / (nx * ny),
    })
}

/// Median with the mean-of-central-pair rule for even counts. Sorts in place.
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn sigma_from_distances(mut distances: Vec<f64>) -> f64 {
    let median = median_in_place(&mut distances);
    if median > 0.0 {
        libm::sqrt(median)
    } else {
        log::warn!("median pairwise distance is zero; falling back to RBF sigma = 1");
        1.0
    }
}

/// `sqrt` of the median Euclidean distance over all `n(n−1)/2` pairs.
/// Falls back to 1 (with a warning) when that median is zero.
pub fn median_sigma<V: AsRef<[f64]>>(vectors: &[V]) -> Result<f64> {
    if vectors.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: vectors.len(),
        });
    }
    let dim = vectors[0].as_ref().len();
    let mut distances = Vec::with_capacity(vectors.len() * (vectors.len() - 1) / 2);
    for (i, x) in vectors.iter().enumerate() {
        check_len(dim, x.as_ref().len())?;
        for y in &vectors[i + 1..] {
            distances.push(libm::sqrt(squared_distance(x.as_ref(), y.as_ref())));
        }
    }
    Ok(sigma_from_distances(distances))
}

/// The same heuristic over the `|a| · |b|` cross distances between two sets,
/// used for query × database blocks.
pub fn median_sigma_cross<A: AsRef<[f64]>, B: AsRef<[f64]>>(a: &[A], b: &[B]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let dim = a[0].as_ref().len();
    let mut distances = Vec::with_capacity(a.len() * b.len());
    for x in a {
        check_len(dim, x.as_ref().len())?;
        for y in b {
            check_len(dim, y.as_ref().len())?;
            distances.push(libm::sqrt(squared_distance(x.as_ref(), y.as_ref())));
        }
    }
    Ok(sigma_from_distances(distances))
}
