//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Solves `max cᵀx  s.t.  Ax = b, x ≥ 0` for problems with a few hundred
//! rows and a few thousand columns.

use crate::error::{BellError, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const FEAS_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpFailure {
    Infeasible,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // (rows + 1) × (cols + 1); last row is the reduced-cost row, last column the rhs.
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let width = self.cols + 1;
        let p = self.at(pr, pc);
        for c in 0..width {
            self.data[pr * width + c] /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * width..(pr + 1) * width].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * width + pc];
            if f != 0.0 {
                let row = &mut self.data[r * width..(r + 1) * width];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[pr] = pc;
    }

    /// Maximizes the objective encoded in the last row (stored as `-c` + basis
    /// corrections) restricting entering columns to `allowed`.
    fn run(&mut self, allowed: usize, limit: usize, pivots: &mut usize) -> std::result::Result<(), LpFailure> {
        loop {
            // Bland: lowest-index column with negative reduced cost.
            let Some(pc) = (0..allowed).find(|&c| self.at(self.rows, c) < -COST_EPS) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bv)) => {
                            if ratio < bv - 1e-14 || (ratio <= bv + 1e-14 && self.basis[r] < self.basis[br]) {
                                Some((r, ratio))
                            } else {
                                Some((br, bv))
                            }
                        }
                    }
                }
            }
            let Some((pr, _)) = best else {
                return Err(LpFailure::Unbounded);
            };
            self.pivot(pr, pc);
            *pivots += 1;
            if *pivots > limit {
                return Err(LpFailure::IterationLimit);
            }
        }
    }
}

/// `max cᵀx  s.t.  Ax = b, x ≥ 0`, `a` given row-major with `c.len()` columns.
pub fn maximize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> std::result::Result<LpSolution, LpFailure> {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m, "rhs length");
    assert!(a.iter().all(|row| row.len() == n), "row length");

    // Columns: n structural, then m artificial.
    let cols = n + m;
    let width = cols + 1;
    let mut data = vec![0.0; (m + 1) * width];
    for (r, row) in a.iter().enumerate() {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in row.iter().enumerate() {
            data[r * width + j] = sign * v;
        }
        data[r * width + n + r] = 1.0;
        data[r * width + cols] = sign * b[r];
    }
    // Phase I objective: maximize -Σ artificials; reduced costs after pricing out the basis.
    for r in 0..m {
        for j in 0..width {
            if j < n || j == cols {
                data[m * width + j] -= data[r * width + j];
            }
        }
    }
    let mut t = Tableau { rows: m, cols, data, basis: (n..n + m).collect() };
    let limit = 50 * (m + n) + 1000;
    let mut pivots = 0;
    t.run(n, limit, &mut pivots)?;
    if -t.rhs(m) > FEAS_EPS {
        return Err(LpFailure::Infeasible);
    }

    // Drive remaining artificials out of the basis; rows with no structural
    // entry are redundant and get dropped.
    let mut keep = vec![true; m];
    for r in 0..m {
        if t.basis[r] >= n {
            if let Some(pc) = (0..n).find(|&c| t.at(r, c).abs() > 1e-9) {
                t.pivot(r, pc);
                pivots += 1;
            } else {
                keep[r] = false;
            }
        }
    }
    let kept: Vec<usize> = (0..m).filter(|&r| keep[r]).collect();

    // Phase II tableau over structural columns only.
    let rows = kept.len();
    let width2 = n + 1;
    let mut data2 = vec![0.0; (rows + 1) * width2];
    let mut basis2 = Vec::with_capacity(rows);
    for (i, &r) in kept.iter().enumerate() {
        for j in 0..n {
            data2[i * width2 + j] = t.at(r, j);
        }
        data2[i * width2 + n] = t.rhs(r);
        basis2.push(t.basis[r]);
    }
    for j in 0..n {
        data2[rows * width2 + j] = -c[j];
    }
    for (i, &bcol) in basis2.iter().enumerate() {
        let cb = c[bcol];
        if cb != 0.0 {
            for j in 0..width2 {
                data2[rows * width2 + j] += cb * data2[i * width2 + j];
            }
        }
    }
    let mut t2 = Tableau { rows, cols: n, data: data2, basis: basis2 };
    t2.run(n, limit + pivots, &mut pivots)?;

    let mut x = vec![0.0; n];
    for (i, &bcol) in t2.basis.iter().enumerate() {
        x[bcol] = t2.rhs(i).max(0.0);
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { objective, x, pivots })
}

pub(crate) fn into_error(f: LpFailure) -> BellError {
    BellError::Lp(format!("{f:?}"))
}

pub(crate) fn maximize_checked(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    maximize(a, b, c).map_err(into_error)
}
