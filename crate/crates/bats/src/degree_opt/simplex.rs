//! Self-contained dense two-phase simplex, sized for a few hundred
//! variables and constraints. The contract is the caller's
//! post-condition check, not this routine.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimplexError {
    #[error("constraints are infeasible")]
    Infeasible,
    #[error("objective is unbounded")]
    Unbounded,
    #[error("iteration limit exceeded")]
    IterationLimit,
}

const TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 200_000;
const DEGENERATE_SWITCH: usize = 500;

/// Maximize `objective . x` subject to `row . x >= 0` for every
/// inequality row, `equality . x = rhs`, and `x >= 0`.
pub fn maximize(
    objective: &[f64],
    inequalities: &[Vec<f64>],
    equality: &[f64],
    rhs: f64,
) -> Result<Vec<f64>, SimplexError> {
    let n = objective.len();
    assert!(inequalities.iter().all(|r| r.len() == n));
    assert_eq!(equality.len(), n);
    assert!(rhs >= 0.0);

    let n_ineq = inequalities.len();
    let n_rows = n_ineq + 1;
    let slack0 = n;
    let artificial = n + n_ineq;
    let n_cols = n + n_ineq + 1; // structural + slacks + one artificial
    let rhs_col = n_cols;

    // Row 0 is the objective; constraint rows follow.
    let mut t = vec![vec![0.0f64; n_cols + 1]; n_rows + 1];
    let mut basis = vec![0usize; n_rows + 1];

    // row . x >= 0  becomes  -row . x + s = 0 with s basic at 0.
    for (i, row) in inequalities.iter().enumerate() {
        let r = i + 1;
        for (j, &a) in row.iter().enumerate() {
            t[r][j] = -a;
        }
        t[r][slack0 + i] = 1.0;
        t[r][rhs_col] = 0.0;
        basis[r] = slack0 + i;
    }
    // The equality keeps an artificial basic variable.
    {
        let r = n_ineq + 1;
        for (j, &e) in equality.iter().enumerate() {
            t[r][j] = e;
        }
        t[r][artificial] = 1.0;
        t[r][rhs_col] = rhs;
        basis[r] = artificial;
    }

    // Phase 1: maximize -artificial.
    set_objective(&mut t, &basis, &|j| if j == artificial { -1.0 } else { 0.0 });
    run(&mut t, &mut basis, n_cols, None)?;
    if t[0][rhs_col].abs() > 1e-7 {
        return Err(SimplexError::Infeasible);
    }

    // Phase 2: the real objective, artificial forbidden from entering.
    set_objective(&mut t, &basis, &|j| {
        if j < n {
            objective[j]
        } else {
            0.0
        }
    });
    run(&mut t, &mut basis, n_cols, Some(artificial))?;

    let mut x = vec![0.0f64; n];
    for (r, &b) in basis.iter().enumerate().skip(1) {
        if b < n {
            x[b] = t[r][rhs_col];
        }
    }
    Ok(x)
}

/// Rebuild the objective row for `maximize c . x` and price out the
/// current basis.
fn set_objective(t: &mut [Vec<f64>], basis: &[usize], c: &dyn Fn(usize) -> f64) {
    let n_cols = t[0].len() - 1;
    for (j, cell) in t[0].iter_mut().take(n_cols).enumerate() {
        *cell = -c(j);
    }
    t[0][n_cols] = 0.0;
    for r in 1..t.len() {
        let factor = t[0][basis[r]];
        if factor != 0.0 {
            let row = t[r].clone();
            for (dst, src) in t[0].iter_mut().zip(&row) {
                *dst -= factor * src;
            }
        }
    }
}

fn run(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    n_cols: usize,
    forbidden: Option<usize>,
) -> Result<(), SimplexError> {
    let rhs_col = n_cols;
    let mut stalled = 0usize;
    let mut bland = false;
    let mut last_objective = t[0][rhs_col];
    for _ in 0..MAX_ITERATIONS {
        // Entering column.
        let mut entering = None;
        if bland {
            entering = t[0]
                .iter()
                .take(n_cols)
                .enumerate()
                .position(|(j, &v)| Some(j) != forbidden && v < -TOL);
        } else {
            let mut best = -TOL;
            for (j, &v) in t[0].iter().take(n_cols).enumerate() {
                if Some(j) != forbidden && v < best {
                    best = v;
                    entering = Some(j);
                }
            }
        }
        let Some(e) = entering else {
            return Ok(());
        };
        // Leaving row by minimum ratio; ties to the smallest basis index.
        let mut leave: Option<(usize, f64)> = None;
        for r in 1..t.len() {
            let a = t[r][e];
            if a > TOL {
                let ratio = t[r][rhs_col] / a;
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < lratio - TOL
                            || (ratio < lratio + TOL && basis[r] < basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((lr, _)) = leave else {
            return Err(SimplexError::Unbounded);
        };
        pivot(t, lr, e);
        basis[lr] = e;

        let obj = t[0][rhs_col];
        if obj > last_objective + TOL {
            last_objective = obj;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > DEGENERATE_SWITCH {
                bland = true;
            }
        }
    }
    Err(SimplexError::IterationLimit)
}

fn pivot(t: &mut [Vec<f64>], row: usize, col: usize) {
    let inv = 1.0 / t[row][col];
    for v in t[row].iter_mut() {
        *v *= inv;
    }
    let pivot_row = t[row].clone();
    for (r, target) in t.iter_mut().enumerate() {
        if r == row {
            continue;
        }
        let factor = target[col];
        if factor != 0.0 {
            for (dst, src) in target.iter_mut().zip(&pivot_row) {
                *dst -= factor * src;
            }
        }
    }
}
