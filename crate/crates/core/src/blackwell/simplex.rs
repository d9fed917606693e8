//! Dense phase-1 simplex for small feasibility problems.
//!
//! Solves `min sum(a)` subject to `A x + a = b`, `x, a >= 0` on a full
//! tableau. Bland's rule (lowest index enters, lowest basic index leaves on
//! ratio ties) guarantees termination on degenerate problems.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct PhaseOne {
    /// Optimal sum of artificial variables; zero iff `A x = b, x >= 0` is feasible.
    pub infeasibility: f64,
    /// Values of the structural variables at the optimum.
    pub x: Vec<f64>,
    pub pivots: usize,
}

/// `a` holds `rows` equality constraints over `cols` variables, row-major.
pub fn phase_one(a: &[f64], b: &[f64], rows: usize, cols: usize) -> Result<PhaseOne> {
    if a.len() != rows * cols || b.len() != rows {
        return Err(Error::Dimension(format!(
            "constraint matrix {} entries for {rows}x{cols}, rhs {}",
            a.len(),
            b.len()
        )));
    }
    // Columns: structural 0..cols, artificial cols..cols+rows, then rhs.
    let width = cols + rows + 1;
    let rhs = width - 1;
    let mut t = vec![0.0; rows * width];
    for i in 0..rows {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut t[i * width..(i + 1) * width];
        for j in 0..cols {
            row[j] = sign * a[i * cols + j];
        }
        row[cols + i] = 1.0;
        row[rhs] = sign * b[i];
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    // Reduced costs of the phase-1 objective; the last slot carries -objective.
    let mut cost = vec![0.0; width];
    for i in 0..rows {
        for j in 0..cols {
            cost[j] -= t[i * width + j];
        }
        cost[rhs] -= t[i * width + rhs];
    }

    let mut pivots = 0;
    while let Some(enter) = (0..width - 1).find(|&j| cost[j] < -PIVOT_EPS) {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let coef = t[i * width + enter];
            if coef <= PIVOT_EPS {
                continue;
            }
            let ratio = t[i * width + rhs] / coef;
            leave = match leave {
                None => Some((i, ratio)),
                Some((r, best)) => {
                    if ratio < best - PIVOT_EPS
                        || ((ratio - best).abs() <= PIVOT_EPS && basis[i] < basis[r])
                    {
                        Some((i, ratio))
                    } else {
                        Some((r, best))
                    }
                }
            };
        }
        let Some((row, _)) = leave else {
            // Unbounded direction; cannot happen for a phase-1 objective
            // bounded below by zero, so treat it as numerical breakdown.
            return Err(Error::Domain("simplex: unbounded phase-1 problem".into()));
        };
        pivot(&mut t, &mut cost, width, rows, row, enter);
        basis[row] = enter;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::Domain("simplex: pivot limit exceeded".into()));
        }
    }

    let mut x = vec![0.0; cols];
    let mut infeasibility = 0.0;
    for (i, &v) in basis.iter().enumerate() {
        let val = t[i * width + rhs];
        if v < cols {
            x[v] = val;
        } else {
            infeasibility += val;
        }
    }
    Ok(PhaseOne {
        infeasibility,
        x,
        pivots,
    })
}

fn pivot(t: &mut [f64], cost: &mut [f64], width: usize, rows: usize, row: usize, col: usize) {
    let p = t[row * width + col];
    for v in &mut t[row * width..(row + 1) * width] {
        *v /= p;
    }
    let pivot_row: Vec<f64> = t[row * width..(row + 1) * width].to_vec();
    for i in 0..rows {
        if i == row {
            continue;
        }
        let f = t[i * width + col];
        if f != 0.0 {
            for (v, &pr) in t[i * width..(i + 1) * width].iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
        }
    }
    let f = cost[col];
    if f != 0.0 {
        for (v, &pr) in cost.iter_mut().zip(&pivot_row) {
            *v -= f * pr;
        }
    }
}
