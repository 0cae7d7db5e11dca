//! Norm-guided approximations to the exact assignment.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{solve_optimal, solve_submatrix, AffinityMatrix, AssignmentResult, Matcher};
use crate::error::{Error, Result};

const UNASSIGNED: usize = usize::MAX;

/// Indices sorted by descending norm, lowest index first among equals.
fn by_descending_norm(norms: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    order
}

/// Each row in `rows` (in order) takes its best still-free column.
fn greedy_fill(a: &AffinityMatrix, rows: &[usize], col_taken: &mut [bool], permutation: &mut [usize]) {
    for &r in rows {
        let row = a.row(r);
        let mut best = UNASSIGNED;
        for (c, &v) in row.iter().enumerate() {
            if !col_taken[c] && (best == UNASSIGNED || v > row[best]) {
                best = c;
            }
        }
        col_taken[best] = true;
        permutation[r] = best;
    }
}

/// Rows in descending norm order each take the highest-affinity unassigned
/// column. `O(S log S)` sort plus an `O(S²)` scan.
pub fn solve_greedy(a: &AffinityMatrix) -> AssignmentResult {
    let s = a.size();
    let mut permutation = vec![UNASSIGNED; s];
    let mut col_taken = vec![false; s];
    greedy_fill(a, &by_descending_norm(a.row_norms()), &mut col_taken, &mut permutation);
    AssignmentResult::scored(a, permutation, Matcher::Greedy)
}

/// The `k` largest-norm rows and the `k` largest-norm columns (selected
/// independently) are matched exactly; the remaining rows follow the greedy
/// rule over the remaining columns.
pub fn solve_topk_greedy(a: &AffinityMatrix, k: usize) -> Result<AssignmentResult> {
    let s = a.size();
    if k == 0 || k > s {
        return Err(Error::InvalidParameter(format!(
            "topk-greedy needs 1 <= k <= S, got k={k} with S={s}"
        )));
    }
    if k == s {
        let mut r = solve_optimal(a);
        r.method = Matcher::TopKGreedy { k };
        return Ok(r);
    }
    let row_order = by_descending_norm(a.row_norms());
    let col_order = by_descending_norm(a.col_norms());
    let mut permutation = vec![UNASSIGNED; s];
    solve_submatrix(a, &row_order[..k], &col_order[..k], &mut permutation);
    let mut col_taken = vec![false; s];
    for &c in &col_order[..k] {
        col_taken[c] = true;
    }
    greedy_fill(a, &row_order[k..], &mut col_taken, &mut permutation);
    Ok(AssignmentResult::scored(a, permutation, Matcher::TopKGreedy { k }))
}

/// Rows and columns are each sorted by descending norm and cut into
/// consecutive blocks of `b` (the last may be smaller); the `t`-th row block
/// is matched exactly against the `t`-th column block. `⌈S/b⌉ · O(b³)`.
/// `b >= S` is a single block and therefore exact.
pub fn solve_batch_optimal(a: &AffinityMatrix, b: usize) -> Result<AssignmentResult> {
    if b == 0 {
        return Err(Error::InvalidParameter("batch-optimal needs b >= 1".into()));
    }
    let s = a.size();
    if b >= s {
        let mut r = solve_optimal(a);
        r.method = Matcher::BatchOptimal { b };
        return Ok(r);
    }
    let row_order = by_descending_norm(a.row_norms());
    let col_order = by_descending_norm(a.col_norms());
    let mut permutation = vec![UNASSIGNED; s];
    for (rows, cols) in row_order.chunks(b).zip(col_order.chunks(b)) {
        solve_submatrix(a, rows, cols, &mut permutation);
    }
    Ok(AssignmentResult::scored(a, permutation, Matcher::BatchOptimal { b }))
}
