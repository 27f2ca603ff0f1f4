//! Minimum-cost bipartite assignment (Hungarian method with potentials).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Assigns every row of the smaller side of a `rows x cols` cost matrix
/// (row-major) to a distinct column so that the total cost is minimal.
///
/// Returns, per row, the column it is assigned to; rows are left
/// unassigned (`None`) only when `rows > cols`.
pub fn min_cost_assignment(cost: &[f64], rows: usize, cols: usize) -> Result<Vec<Option<usize>>> {
    if cost.len() != rows * cols {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} costs for a {rows}x{cols} matrix",
            cost.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("assignment cost"));
    }
    if rows == 0 || cols == 0 {
        return Ok(vec![None; rows]);
    }
    if rows <= cols {
        Ok(hungarian(|r, c| cost[r * cols + c], rows, cols)
            .into_iter()
            .map(Some)
            .collect())
    } else {
        let col_to_row = hungarian(|c, r| cost[r * cols + c], cols, rows);
        let mut out = vec![None; rows];
        for (c, r) in col_to_row.into_iter().enumerate() {
            out[r] = Some(c);
        }
        Ok(out)
    }
}

/// `n <= m`; returns the column of every row.
fn hungarian<F: Fn(usize, usize) -> f64>(cost: F, n: usize, m: usize) -> Vec<usize> {
    // 1-based shortest augmenting path formulation; column 0 is virtual
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=m {
                if used[col] {
                    continue;
                }
                let reduced = cost(r0 - 1, col - 1) - u[r0] - v[col];
                if reduced < min_to[col] {
                    min_to[col] = reduced;
                    way[col] = col0;
                }
                if min_to[col] < delta {
                    delta = min_to[col];
                    col1 = col;
                }
            }
            for col in 0..=m {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=m {
        if owner[col] != 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(cost: &[f64], rows: usize, cols: usize) -> f64 {
        fn rec(cost: &[f64], cols: usize, row: usize, rows: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == rows {
                *best = best.min(acc);
                return;
            }
            for c in 0..cols {
                if !used[c] {
                    used[c] = true;
                    rec(cost, cols, row + 1, rows, used, acc + cost[row * cols + c], best);
                    used[c] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, cols, 0, rows, &mut vec![false; cols], 0.0, &mut best);
        best
    }

    fn total(cost: &[f64], cols: usize, a: &[Option<usize>]) -> f64 {
        a.iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| cost[r * cols + c]))
            .sum()
    }

    #[test]
    fn matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..400 {
            let rows = rng.random_range(1..=6);
            let cols = rng.random_range(rows..=6);
            let cost: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0.0..10.0)).collect();
            let a = min_cost_assignment(&cost, rows, cols).unwrap();
            let mut seen = vec![false; cols];
            for c in a.iter().map(|c| c.unwrap()) {
                assert!(!seen[c]);
                seen[c] = true;
            }
            assert!((total(&cost, cols, &a) - brute(&cost, rows, cols)).abs() < 1e-9);
        }
    }

    #[test]
    fn more_rows_than_columns() {
        let cost = [5.0, 1.0, 9.0, 2.0, 3.0, 8.0];
        // 3 rows, 2 cols
        let a = min_cost_assignment(&cost, 3, 2).unwrap();
        assert_eq!(a, vec![Some(1), None, Some(0)]);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(min_cost_assignment(&[], 0, 3).unwrap(), vec![]);
        assert_eq!(min_cost_assignment(&[], 2, 0).unwrap(), vec![None, None]);
        assert!(min_cost_assignment(&[1.0], 1, 2).is_err());
        assert!(min_cost_assignment(&[f64::NAN], 1, 1).is_err());
    }
}
