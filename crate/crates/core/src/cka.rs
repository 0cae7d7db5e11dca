//! HSIC and Centered Kernel Alignment between RSMs.
//!
//! `HSIC(K, L) = tr(K H L H) / (n − 1)²` with the centering matrix
//! `H = I − 11ᵀ/n` (the biased estimator). `tr(K H L H) = Σ_ij (HKH)_ij L_ji`,
//! and `HKH` is obtained by double-centering `K`, so the whole thing is `O(n²)`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// `H = I − (1/n)·11ᵀ`.
pub fn centering_matrix(n: usize) -> Result<DenseMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("centering matrix needs n >= 1".into()));
    }
    let off = 1.0 / n as f64;
    Ok(DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - off } else { -off }))
}

fn check_square_pair(k: &DenseMatrix, l: &DenseMatrix) -> Result<usize> {
    if !k.is_square() || !l.is_square() {
        return Err(Error::Shape(format!(
            "RSMs must be square, got {}×{} and {}×{}",
            k.rows(),
            k.cols(),
            l.rows(),
            l.cols()
        )));
    }
    if k.rows() != l.rows() {
        return Err(Error::DimensionMismatch {
            expected: k.rows(),
            got: l.rows(),
        });
    }
    if k.rows() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: k.rows(),
        });
    }
    Ok(k.rows())
}

/// `HKH` via row, column and grand means.
fn double_center(k: &DenseMatrix) -> DenseMatrix {
    let n = k.rows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).iter().sum::<f64>() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| (0..n).map(|i| k.get(i, j)).sum::<f64>() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DenseMatrix::from_fn(n, n, |i, j| k.get(i, j) - row_means[i] - col_means[j] + grand)
}

pub fn hsic(k: &DenseMatrix, l: &DenseMatrix) -> Result<f64> {
    let n = check_square_pair(k, l)?;
    let kc = double_center(k);
    let mut trace = 0.0;
    for i in 0..n {
        for j in 0..n {
            trace += kc.get(i, j) * l.get(j, i);
        }
    }
    let denom = (n - 1) as f64;
    Ok(trace / (denom * denom))
}

/// `HSIC(K, L) / sqrt(HSIC(K, K) · HSIC(L, L))`. `Ok(None)` when either
/// self-HSIC is not positive, e.g. for a constant RSM.
pub fn cka(k: &DenseMatrix, l: &DenseMatrix) -> Result<Option<f64>> {
    let kl = hsic(k, l)?;
    let kk = hsic(k, k)?;
    let ll = hsic(l, l)?;
    if !(kk > 0.0 && ll > 0.0) {
        log::warn!("CKA undefined: self-HSIC is zero (HSIC(K,K) = {kk}, HSIC(L,L) = {ll})");
        return Ok(None);
    }
    Ok(Some(kl / libm::sqrt(kk * ll)))
}

/// Mean CKA over paired mini-batch RSMs; batches where CKA is undefined are
/// skipped, and `None` is returned if all of them are.
pub fn cka_batched(k_batches: &[DenseMatrix], l_batches: &[DenseMatrix]) -> Result<Option<f64>> {
    crate::error::check_len(k_batches.len(), l_batches.len())?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, l) in k_batches.iter().zip(l_batches) {
        if let Some(v) = cka(k, l)? {
            sum += v;
            count += 1;
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// `out[p][q] = cka(a[p], b[q])`, `NaN` where undefined.
pub fn cka_layer_matrix(rsms_a: &[DenseMatrix], rsms_b: &[DenseMatrix]) -> Result<DenseMatrix> {
    let batched_a: Vec<Vec<DenseMatrix>> = rsms_a.iter().map(|m| alloc::vec![m.clone()]).collect();
    let batched_b: Vec<Vec<DenseMatrix>> = rsms_b.iter().map(|m| alloc::vec![m.clone()]).collect();
    cka_layer_matrix_batched(&batched_a, &batched_b)
}

/// Layer matrix where every layer holds one RSM per mini-batch; each entry
/// is the per-batch CKA averaged over batches.
pub fn cka_layer_matrix_batched(layers_a: &[Vec<DenseMatrix>], layers_b: &[Vec<DenseMatrix>]) -> Result<DenseMatrix> {
    let mut out = DenseMatrix::zeros(layers_a.len(), layers_b.len());
    for (p, a) in layers_a.iter().enumerate() {
        for (q, b) in layers_b.iter().enumerate() {
            out.set(p, q, cka_batched(a, b)?.unwrap_or(f64::NAN));
        }
    }
    Ok(out)
}

/// Elementwise `a − b` of two equally shaped grids.
pub fn difference(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "cannot subtract a {}×{} grid from a {}×{} grid",
            b.rows(),
            b.cols(),
            a.rows(),
            a.cols()
        )));
    }
    Ok(DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| {
        a.get(i, j) - b.get(i, j)
    }))
}
