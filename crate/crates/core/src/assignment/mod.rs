//! Affinity matrices between the concept vectors of two samples and the
//! matchers that align them.
//!
//! A matcher returns a permutation `p` that assigns column `p[a]` (a spatial
//! location of the second sample) to row `a` (a location of the first),
//! maximising `Σ_a A[a][p[a]]`. [`solve_optimal`] is exact; [`solve_greedy`],
//! [`solve_topk_greedy`] and [`solve_batch_optimal`] trade quality for time
//! by exploiting concept-vector norms.
//!
//! Ties (equal norms, equal affinities) are always broken towards the lowest
//! index, so every solver is deterministic.

mod approx;
mod lap;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use crate::error::{check_len, Error, Result};

pub use approx::{solve_batch_optimal, solve_greedy, solve_topk_greedy};

/// `S × S` matrix of inner products between the concept vectors of two
/// samples, with the L2 norms of those vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    size: usize,
    values: Vec<f64>,
    row_norms: Vec<f64>,
    col_norms: Vec<f64>,
}

impl AffinityMatrix {
    pub fn new(size: usize, values: Vec<f64>, row_norms: Vec<f64>, col_norms: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::Shape(format!(
                "affinity matrix must be square: {} values for size {size}",
                values.len()
            )));
        }
        check_len(size, row_norms.len())?;
        check_len(size, col_norms.len())?;
        if values
            .iter()
            .chain(&row_norms)
            .chain(&col_norms)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Validation("affinity matrix contains non-finite values".into()));
        }
        Ok(AffinityMatrix {
            size,
            values,
            row_norms,
            col_norms,
        })
    }

    /// From rows of values; norms must be supplied since they belong to the
    /// underlying concept vectors, not to the affinity values.
    pub fn from_rows(rows: &[Vec<f64>], row_norms: Vec<f64>, col_norms: Vec<f64>) -> Result<Self> {
        let size = rows.len();
        let mut values = Vec::with_capacity(size * size);
        for r in rows {
            if r.len() != size {
                return Err(Error::Shape(format!(
                    "affinity matrix must be square, row has {} entries for size {size}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(size, values, row_norms, col_norms)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.size..(row + 1) * self.size]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_norms(&self) -> &[f64] {
        &self.row_norms
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }

    /// `Σ_a A[a][permutation[a]]`, summed in row order.
    pub fn total(&self, permutation: &[usize]) -> f64 {
        permutation.iter().enumerate().map(|(a, &b)| self.get(a, b)).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.size).map(|a| self.get(a, a)).sum()
    }
}

/// Transposes a channel-major `C × S` sample into `S` contiguous concept
/// vectors of length `C`.
pub fn concept_vectors(sample: &[f64], n_channels: usize, n_spatial: usize) -> Vec<f64> {
    debug_assert_eq!(sample.len(), n_channels * n_spatial);
    let mut out = vec![0.0; sample.len()];
    for c in 0..n_channels {
        for s in 0..n_spatial {
            out[s * n_channels + c] = sample[c * n_spatial + s];
        }
    }
    out
}

/// L2 norm of each concept vector in an `S × C` concept layout.
pub fn concept_norms(concepts: &[f64], n_channels: usize) -> Vec<f64> {
    concepts
        .chunks_exact(n_channels)
        .map(|v| libm::sqrt(crate::kernels::dot(v, v)))
        .collect()
}

/// Affinity from precomputed `S × C` concept layouts and their norms.
pub fn affinity_from_concepts(
    concepts_i: &[f64],
    concepts_j: &[f64],
    n_channels: usize,
    norms_i: &[f64],
    norms_j: &[f64],
) -> Result<AffinityMatrix> {
    check_len(concepts_i.len(), concepts_j.len())?;
    let size = norms_i.len();
    check_len(size * n_channels, concepts_i.len())?;
    let mut values = Vec::with_capacity(size * size);
    for vi in concepts_i.chunks_exact(n_channels) {
        for vj in concepts_j.chunks_exact(n_channels) {
            values.push(crate::kernels::dot(vi, vj));
        }
    }
    Ok(AffinityMatrix {
        size,
        values,
        row_norms: norms_i.to_vec(),
        col_norms: norms_j.to_vec(),
    })
}

/// `A[a][b] = ⟨v_{i,a}, v_{j,b}⟩` for two channel-major `C × S` samples.
pub fn affinity(z_i: &[f64], z_j: &[f64], n_channels: usize, n_spatial: usize) -> Result<AffinityMatrix> {
    if z_i.len() != n_channels * n_spatial || z_j.len() != n_channels * n_spatial {
        return Err(Error::Shape(format!(
            "samples must both be C×S = {}×{}, got {} and {} values",
            n_channels,
            n_spatial,
            z_i.len(),
            z_j.len()
        )));
    }
    let ci = concept_vectors(z_i, n_channels, n_spatial);
    let cj = concept_vectors(z_j, n_channels, n_spatial);
    let ni = concept_norms(&ci, n_channels);
    let nj = concept_norms(&cj, n_channels);
    affinity_from_concepts(&ci, &cj, n_channels, &ni, &nj)
}

/// Matching strategy used to align the spatial axes of two samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Matcher {
    /// Keep locations as they are (spatio-semantic comparison).
    None,
    Optimal,
    Greedy,
    TopKGreedy {
        k: usize,
    },
    BatchOptimal {
        b: usize,
    },
}

impl Matcher {
    /// Batch-Optimal with `b = 512`, the default semantic configuration.
    pub const DEFAULT_SEMANTIC: Matcher = Matcher::BatchOptimal { b: 512 };

    pub fn name(&self) -> &'static str {
        match self {
            Matcher::None => "none",
            Matcher::Optimal => "optimal",
            Matcher::Greedy => "greedy",
            Matcher::TopKGreedy { .. } => "topk-greedy",
            Matcher::BatchOptimal { .. } => "batch-optimal",
        }
    }

    /// Name plus parameter, e.g. `batch-optimal:128`.
    pub fn label(&self) -> String {
        match self {
            Matcher::TopKGreedy { k } => format!("topk-greedy:{k}"),
            Matcher::BatchOptimal { b } => format!("batch-optimal:{b}"),
            other => String::from(other.name()),
        }
    }

    pub fn validate_for(&self, spatial: usize) -> Result<()> {
        match *self {
            Matcher::TopKGreedy { k } if k == 0 || k > spatial => Err(Error::InvalidParameter(format!(
                "topk-greedy needs 1 <= k <= S, got k={k} with S={spatial}"
            ))),
            Matcher::BatchOptimal { b: 0 } => Err(Error::InvalidParameter("batch-optimal needs b >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn solve(&self, a: &AffinityMatrix) -> Result<AssignmentResult> {
        match *self {
            Matcher::None => Ok(solve_identity(a)),
            Matcher::Optimal => Ok(solve_optimal(a)),
            Matcher::Greedy => Ok(solve_greedy(a)),
            Matcher::TopKGreedy { k } => solve_topk_greedy(a, k),
            Matcher::BatchOptimal { b } => solve_batch_optimal(a, b),
        }
    }
}

/// A bijection on spatial locations and the affinity it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    pub permutation: Vec<usize>,
    pub total_affinity: f64,
    pub method: Matcher,
    /// Filled in by callers that time the solve; solvers leave it empty.
    pub solve_time: Option<Duration>,
}

impl AssignmentResult {
    pub(crate) fn scored(a: &AffinityMatrix, permutation: Vec<usize>, method: Matcher) -> Self {
        debug_assert!(is_bijection(&permutation));
        let total_affinity = a.total(&permutation);
        AssignmentResult {
            permutation,
            total_affinity,
            method,
            solve_time: None,
        }
    }

    /// Recomputes `total_affinity` of the stored permutation on `a`.
    pub fn rescored(mut self, a: &AffinityMatrix) -> Self {
        self.total_affinity = a.total(&self.permutation);
        self
    }
}

pub fn is_bijection(permutation: &[usize]) -> bool {
    let mut seen = vec![false; permutation.len()];
    permutation
        .iter()
        .all(|&p| p < seen.len() && !core::mem::replace(&mut seen[p], true))
}

/// The identity permutation of `s` locations. Its total is unset (zero)
/// until it is [rescored](AssignmentResult::rescored) on an affinity matrix.
pub fn identity_assignment(s: usize) -> AssignmentResult {
    AssignmentResult {
        permutation: (0..s).collect(),
        total_affinity: 0.0,
        method: Matcher::None,
        solve_time: None,
    }
}

/// Identity assignment scored on `a` (its trace).
pub fn solve_identity(a: &AffinityMatrix) -> AssignmentResult {
    identity_assignment(a.size()).rescored(a)
}

/// Exact maximum-weight assignment.
pub fn solve_optimal(a: &AffinityMatrix) -> AssignmentResult {
    let permutation = lap::maximize(a.size(), a.values());
    AssignmentResult::scored(a, permutation, Matcher::Optimal)
}

/// Solves the sub-problem on the given rows and columns exactly, writing
/// the matches into `permutation`.
pub(crate) fn solve_submatrix(a: &AffinityMatrix, rows: &[usize], cols: &[usize], permutation: &mut [usize]) {
    debug_assert_eq!(rows.len(), cols.len());
    let k = rows.len();
    if k == 0 {
        return;
    }
    let mut sub = Vec::with_capacity(k * k);
    for &r in rows {
        let row = a.row(r);
        sub.extend(cols.iter().map(|&c| row[c]));
    }
    for (local_row, local_col) in lap::maximize(k, &sub).into_iter().enumerate() {
        permutation[rows[local_row]] = cols[local_col];
    }
}

/// `approx.total / optimal.total`; `None` when the optimum is zero.
pub fn quality_ratio(approx: &AssignmentResult, optimal: &AssignmentResult) -> Option<f64> {
    if optimal.total_affinity == 0.0 {
        None
    } else {
        Some(approx.total_affinity / optimal.total_affinity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[[f64; 2]], rn: [f64; 2], cn: [f64; 2]) -> AffinityMatrix {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        AffinityMatrix::from_rows(&rows, rn.to_vec(), cn.to_vec()).unwrap()
    }

    #[test]
    fn affinity_examples() {
        // z columns e0, e1 (C = S = 2), channel-major: [[1,0],[0,1]].
        let zi = [1.0, 0.0, 0.0, 1.0];
        let a = affinity(&zi, &zi, 2, 2).unwrap();
        assert_eq!(a.values(), &[1.0, 0.0, 0.0, 1.0]);
        // z_j columns (e1, e0).
        let zj = [0.0, 1.0, 1.0, 0.0];
        let a = affinity(&zi, &zj, 2, 2).unwrap();
        assert_eq!(a.values(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(a.row_norms(), &[1.0, 1.0]);
        let a = affinity(&zi, &[0.0; 4], 2, 2).unwrap();
        assert!(a.values().iter().all(|&v| v == 0.0));
        assert_eq!(a.col_norms(), &[0.0, 0.0]);
        assert!(matches!(affinity(&zi, &[0.0; 3], 2, 2), Err(Error::Shape(_))));
    }

    #[test]
    fn optimal_examples() {
        let r = solve_optimal(&mat(&[[0.0, 5.0], [5.0, 0.0]], [1.0, 1.0], [1.0, 1.0]));
        assert_eq!(r.permutation, vec![1, 0]);
        assert_eq!(r.total_affinity, 10.0);
        let r = solve_optimal(&mat(&[[4.0, 3.0], [3.0, 0.0]], [2.0, 1.0], [2.0, 1.0]));
        assert_eq!(r.permutation, vec![1, 0]);
        assert_eq!(r.total_affinity, 6.0);
        let eye: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let a = AffinityMatrix::from_rows(&eye, vec![1.0; 5], vec![1.0; 5]).unwrap();
        let r = solve_optimal(&a);
        assert_eq!(r.permutation, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.total_affinity, 5.0);
    }

    #[test]
    fn non_square_is_rejected() {
        let err = AffinityMatrix::from_rows(&[vec![1.0, 2.0]], vec![1.0], vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn identity_examples() {
        assert_eq!(identity_assignment(3).permutation, vec![0, 1, 2]);
        let a = mat(&[[0.0, 5.0], [5.0, 0.0]], [1.0, 1.0], [1.0, 1.0]);
        assert_eq!(solve_identity(&a).total_affinity, 0.0);
        let a = mat(&[[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0], [1.0, 1.0]);
        assert_eq!(solve_identity(&a).total_affinity, 2.0);
    }

    #[test]
    fn quality_ratio_examples() {
        let a = mat(&[[4.0, 3.0], [3.0, 0.0]], [2.0, 1.0], [2.0, 1.0]);
        let opt = solve_optimal(&a);
        assert_eq!(quality_ratio(&opt, &opt), Some(1.0));
        let greedy = solve_greedy(&a);
        assert!((quality_ratio(&greedy, &opt).unwrap() - 4.0 / 6.0).abs() < 1e-15);

        let a = mat(&[[0.0, 5.0], [5.0, 0.0]], [1.0, 1.0], [1.0, 1.0]);
        assert_eq!(quality_ratio(&solve_identity(&a), &solve_optimal(&a)), Some(0.0));

        let zero = mat(&[[0.0, 0.0], [0.0, 0.0]], [0.0, 0.0], [0.0, 0.0]);
        assert_eq!(quality_ratio(&solve_identity(&zero), &solve_optimal(&zero)), None);
    }

    #[test]
    fn matcher_validation() {
        assert!(Matcher::TopKGreedy { k: 0 }.validate_for(4).is_err());
        assert!(Matcher::TopKGreedy { k: 5 }.validate_for(4).is_err());
        assert!(Matcher::TopKGreedy { k: 4 }.validate_for(4).is_ok());
        assert!(Matcher::BatchOptimal { b: 0 }.validate_for(4).is_err());
        assert!(Matcher::BatchOptimal { b: 100 }.validate_for(4).is_ok());
        assert_eq!(Matcher::BatchOptimal { b: 128 }.label(), "batch-optimal:128");
    }

    #[test]
    fn bijection_check() {
        assert!(is_bijection(&[2, 0, 1]));
        assert!(!is_bijection(&[0, 0, 1]));
        assert!(!is_bijection(&[0, 3, 1]));
        assert!(is_bijection(&[]));
    }
}
