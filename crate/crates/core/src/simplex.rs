//! Dense tableau simplex for `max cᵀx  s.t.  Ax ≤ b, x ≥ 0` with `b ≥ 0`.
//!
//! The slack basis is feasible, so no phase one is needed. Bland's rule makes
//! the method finite on degenerate problems, which the column programs are.

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint shape mismatch: {rows} rows against {b} right-hand sides or ragged rows")]
    Shape { rows: usize, b: usize },
    #[error("right-hand side must be finite and >= 0 (row {row} is {value})")]
    NegativeRhs { row: usize, value: f64 },
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(LpError::Shape {
            rows: m,
            b: b.len(),
        });
    }
    if let Some((row, &value)) = b
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(LpError::NegativeRhs { row, value });
    }

    // Row-major tableau: m constraint rows then the objective row; columns are
    // the n structural variables, m slacks, and the right-hand side.
    let width = n + m + 1;
    let rhs = n + m;
    let mut tab = vec![0.0; (m + 1) * width];
    for i in 0..m {
        let row = &mut tab[i * width..(i + 1) * width];
        row[..n].copy_from_slice(&a[i]);
        row[n + i] = 1.0;
        row[rhs] = b[i];
    }
    for j in 0..n {
        tab[m * width + j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let limit = 50 * (n + m + 10);
    for _ in 0..limit {
        let obj = &tab[m * width..];
        let Some(enter) = (0..n + m).find(|&j| obj[j] < -PIVOT_EPS) else {
            let mut x = vec![0.0; n];
            for (i, &var) in basis.iter().enumerate() {
                if var < n {
                    x[var] = tab[i * width + rhs];
                }
            }
            return Ok(LpSolution {
                value: tab[m * width + rhs],
                x,
            });
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = tab[i * width + enter];
            if aij > PIVOT_EPS {
                let ratio = tab[i * width + rhs] / aij;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        if ratio < best - PIVOT_EPS
                            || (ratio <= best + PIVOT_EPS && basis[i] < basis[k])
                        {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = leave else {
            return Err(LpError::Unbounded);
        };
        pivot(&mut tab, width, r, enter);
        basis[r] = enter;
    }
    Err(LpError::IterationLimit(limit))
}

fn pivot(tab: &mut [f64], width: usize, r: usize, s: usize) {
    let p = tab[r * width + s];
    for v in &mut tab[r * width..(r + 1) * width] {
        *v /= p;
    }
    let prow: Vec<f64> = tab[r * width..(r + 1) * width].to_vec();
    let rows = tab.len() / width;
    for i in (0..rows).filter(|&i| i != r) {
        let f = tab[i * width + s];
        if f != 0.0 {
            for (v, pv) in tab[i * width..(i + 1) * width].iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
    }
}
