//! Dense two-phase simplex for small standard-form programs:
//! minimize `c'x` subject to `A x = b`, `x >= 0`, with `b >= 0`.
//!
//! Pivoting follows Bland's rule (lowest eligible index for the entering
//! column, lowest basic-variable index among ratio-test ties), which rules
//! out cycling, and every comparison uses a single pivot tolerance. The
//! programs solved here have a handful of rows and a couple dozen columns,
//! so a full dense tableau is the right tool.

use alloc::vec::Vec;

const PIVOT_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 10_000;

/// `minimize c'x  s.t.  A x = b, x >= 0` with `A` given row-major.
#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub m: usize,
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LpFailure {
    /// Phase 1 could not zero out the artificials; the constraints admit no
    /// nonnegative solution. Carries the residual infeasibility.
    Infeasible { residual: f64 },
    /// Iteration budget exhausted (should not happen with Bland's rule on
    /// well-posed inputs).
    IterationLimit,
    /// The objective is unbounded below on the feasible set.
    Unbounded,
}

struct Tableau {
    /// `m` constraint rows over `n + m` columns (originals then
    /// artificials) plus a trailing rhs column.
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row over the same columns; its rhs entry holds the
    /// negated objective value.
    objective: Vec<f64>,
    basis: Vec<usize>,
    n_original: usize,
}

impl Tableau {
    fn rhs(&self, row: usize) -> f64 {
        let width = self.objective.len();
        self.rows[row][width - 1]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.objective.len();
        let scale = self.rows[row][col];
        for v in &mut self.rows[row] {
            *v /= scale;
        }
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let factor = self.rows[r][col];
            if factor != 0.0 {
                for j in 0..width {
                    self.rows[r][j] -= factor * self.rows[row][j];
                }
            }
        }
        let factor = self.objective[col];
        if factor != 0.0 {
            for j in 0..width {
                self.objective[j] -= factor * self.rows[row][j];
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: entering column is the lowest index with a negative
    /// reduced cost among `0..limit`; leaving row minimizes the ratio, ties
    /// broken by the lowest basic-variable index.
    fn run(&mut self, limit: usize) -> Result<(), LpFailure> {
        for _ in 0..MAX_ITERATIONS {
            let entering = (0..limit).find(|&j| self.objective[j] < -PIVOT_TOL);
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let coef = self.rows[r][col];
                if coef > PIVOT_TOL {
                    let ratio = self.rhs(r) / coef;
                    let better = match leaving {
                        None => true,
                        Some((best_row, best_ratio)) => {
                            ratio < best_ratio - PIVOT_TOL
                                || (ratio < best_ratio + PIVOT_TOL
                                    && self.basis[r] < self.basis[best_row])
                        }
                    };
                    if better {
                        leaving = Some((r, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Err(LpFailure::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(LpFailure::IterationLimit)
    }
}

/// Solves the program. `b` must be nonnegative (the callers build it from
/// probabilities).
pub(crate) fn solve_min(problem: &StandardForm) -> Result<LpSolution, LpFailure> {
    let (m, n) = (problem.m, problem.n);
    debug_assert_eq!(problem.a.len(), m * n);
    debug_assert!(problem.b.iter().all(|&v| v >= 0.0));
    let width = n + m + 1;

    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = alloc::vec![0.0; width];
        row[..n].copy_from_slice(&problem.a[i * n..(i + 1) * n]);
        row[n + i] = 1.0;
        row[width - 1] = problem.b[i];
        rows.push(row);
    }

    // Phase 1: minimize the sum of artificials. Reduced costs under the
    // all-artificial basis are the negated column sums.
    let mut objective = alloc::vec![0.0; width];
    for j in 0..n {
        objective[j] = -(0..m).map(|i| rows[i][j]).sum::<f64>();
    }
    objective[width - 1] = -problem.b.iter().sum::<f64>();

    let mut tableau = Tableau {
        rows,
        objective,
        basis: (n..n + m).collect(),
        n_original: n,
    };
    tableau.run(n)?;
    let residual = -tableau.objective[width - 1];
    if residual > PIVOT_TOL {
        return Err(LpFailure::Infeasible { residual });
    }

    // Drive artificials out of the basis; rows that offer no original pivot
    // are redundant and dropped.
    let mut r = 0;
    while r < tableau.rows.len() {
        if tableau.basis[r] >= tableau.n_original {
            let col = (0..tableau.n_original).find(|&j| tableau.rows[r][j].abs() > PIVOT_TOL);
            match col {
                Some(col) => tableau.pivot(r, col),
                None => {
                    tableau.rows.remove(r);
                    tableau.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    // Phase 2 over the real costs.
    let mut objective = alloc::vec![0.0; width];
    objective[..n].copy_from_slice(&problem.c);
    let mut value = 0.0;
    for (r, &basic) in tableau.basis.iter().enumerate() {
        let cost = problem.c[basic];
        if cost != 0.0 {
            value += cost * tableau.rhs(r);
            for (slot, coef) in objective.iter_mut().zip(&tableau.rows[r]) {
                *slot -= cost * coef;
            }
        }
    }
    objective[width - 1] = -value;
    tableau.objective = objective;
    tableau.run(n)?;

    let mut x = alloc::vec![0.0; n];
    for (r, &basic) in tableau.basis.iter().enumerate() {
        if basic < n {
            x[basic] = tableau.rhs(r);
        }
    }
    Ok(LpSolution { value: -tableau.objective[width - 1], x })
}
