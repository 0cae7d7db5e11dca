//! Exact dense linear sum assignment by shortest augmenting paths with
//! dual variables (the Jonker–Volgenant family, in the column-scanning
//! form popularised by Crouse's rectangular LAP solver).
//!
//! Runs in `O(n³)`. Among columns with equal reduced path cost the solver
//! prefers an unassigned column, then the lowest index, so the result is a
//! pure function of the input.

use alloc::vec;
use alloc::vec::Vec;

const NONE: usize = usize::MAX;

/// Minimum-cost assignment of an `n × n` row-major cost matrix.
/// Returns `col_for_row`.
pub(crate) fn minimize(n: usize, cost: &[f64]) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut shortest = vec![f64::INFINITY; n];
    let mut path = vec![NONE; n];
    let mut col_for_row = vec![NONE; n];
    let mut row_for_col = vec![NONE; n];
    let mut row_seen = vec![false; n];
    let mut col_seen = vec![false; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);

    for start in 0..n {
        // Dijkstra-like search for the shortest augmenting path from `start`.
        remaining.clear();
        remaining.extend(0..n);
        row_seen.iter_mut().for_each(|x| *x = false);
        col_seen.iter_mut().for_each(|x| *x = false);
        shortest.iter_mut().for_each(|x| *x = f64::INFINITY);

        let mut min_val = 0.0f64;
        let mut row = start;
        let sink = loop {
            row_seen[row] = true;
            let row_cost = &cost[row * n..(row + 1) * n];
            let mut best_pos = NONE;
            let mut lowest = f64::INFINITY;
            for (pos, &col) in remaining.iter().enumerate() {
                let reduced = min_val + row_cost[col] - u[row] - v[col];
                if reduced < shortest[col] {
                    path[col] = row;
                    shortest[col] = reduced;
                }
                let better = if best_pos == NONE {
                    true
                } else {
                    let cur = remaining[best_pos];
                    shortest[col] < lowest
                        || (shortest[col] == lowest
                            && match (row_for_col[col] == NONE, row_for_col[cur] == NONE) {
                                (true, false) => true,
                                (false, true) => false,
                                _ => col < cur,
                            })
                };
                if better {
                    lowest = shortest[col];
                    best_pos = pos;
                }
            }
            // Finite costs on a complete bipartite graph always augment.
            debug_assert!(lowest.is_finite());
            min_val = lowest;
            let col = remaining.swap_remove(best_pos);
            col_seen[col] = true;
            if row_for_col[col] == NONE {
                break col;
            }
            row = row_for_col[col];
        };

        // Dual update.
        u[start] += min_val;
        for r in 0..n {
            if row_seen[r] && r != start {
                u[r] += min_val - shortest[col_for_row[r]];
            }
        }
        for c in 0..n {
            if col_seen[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        // Augment along the path back to `start`.
        let mut col = sink;
        loop {
            let r = path[col];
            row_for_col[col] = r;
            let prev = core::mem::replace(&mut col_for_row[r], col);
            if r == start {
                break;
            }
            col = prev;
        }
    }
    col_for_row
}

/// Maximum-weight perfect matching of an `n × n` row-major weight matrix.
pub(crate) fn maximize(n: usize, weights: &[f64]) -> Vec<usize> {
    let cost: Vec<f64> = weights.iter().map(|w| -w).collect();
    minimize(n, &cost)
}
