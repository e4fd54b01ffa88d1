//! Minimum-cost rectangular assignment (Kuhn-Munkres with potentials).

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

/// Rows matched to distinct columns at minimum total cost. Every row is
/// matched when `rows ≤ cols`, every column otherwise.
///
/// Returns the column chosen for each row.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> Result<Vec<Option<usize>>> {
    if cost.iter().any(|c| !c.is_finite()) {
        return invalid("assignment costs must be finite");
    }
    let (n, m) = cost.shape();
    if n == 0 || m == 0 {
        return Ok(vec![None; n]);
    }
    if n > m {
        let cols = min_cost_assignment(&cost.transpose())?;
        let mut rows = vec![None; n];
        for (j, i) in cols.into_iter().enumerate() {
            if let Some(i) = i {
                rows[i] = Some(j);
            }
        }
        return Ok(rows);
    }
    // 1-based potentials; column 0 is the virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut col_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        col_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![None; n];
    for j in 1..=m {
        if col_row[j] != 0 {
            rows[col_row[j] - 1] = Some(j - 1);
        }
    }
    Ok(rows)
}

/// Assignment restricted to pairs with `cost ≤ gate`; gated pairs are dropped
/// after solving with them priced above any admissible total.
pub fn gated_assignment(cost: &DMatrix<f64>, gate: f64) -> Result<Vec<Option<usize>>> {
    let (n, m) = cost.shape();
    if cost.iter().any(|c| !c.is_finite()) {
        return invalid("assignment costs must be finite");
    }
    let admissible_max = cost.iter().filter(|c| **c <= gate).fold(0.0f64, |a, c| a.max(c.abs()));
    // one gated pair must outweigh any set of admissible ones
    let big = 1.0 + admissible_max * 2.0 * (n.min(m) as f64 + 1.0);
    let padded = cost.map(|c| if c <= gate { c } else { big });
    let mut rows = min_cost_assignment(&padded)?;
    for (i, r) in rows.iter_mut().enumerate() {
        if let Some(j) = *r {
            if cost[(i, j)] > gate {
                *r = None;
            }
        }
    }
    Ok(rows)
}
