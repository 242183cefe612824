//! Self-contained dense two-phase simplex used only by the enumeration
//! oracle, so the oracle's answers share no solver code with the production
//! path.
//!
//! Solves min c'x s.t. Ax = b, x ≥ 0 on a full tableau with Bland's rule
//! (smallest eligible index enters; smallest basic index leaves on ratio
//! ties), which rules out cycling at the price of speed. Oracle instances
//! are tiny, so speed is irrelevant.

use crate::{Error, Result};

const TOL: f64 = 1e-9;

pub(crate) struct DenseLp {
    pub costs: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

pub(crate) enum LpOutcome {
    Optimal {
        objective: f64,
        /// Primal solution; the oracle only needs objectives, but the tests
        /// check solutions against hand-solved problems.
        #[allow(dead_code)]
        x: Vec<f64>,
    },
    Infeasible,
}

struct Tableau {
    /// m rows × (n_total + 1) columns; the last column is the rhs.
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row, same width; last entry is −objective.
    cost: Vec<f64>,
    basis: Vec<usize>,
    n_total: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let factor = self.rows[row][col];
        for v in &mut self.rows[row] {
            *v /= factor;
        }
        let pivot_row = self.rows[row].clone();
        for (r, other) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = other[col];
            if f.abs() > 0.0 {
                for (a, b) in other.iter_mut().zip(&pivot_row) {
                    *a -= f * b;
                }
            }
        }
        let f = self.cost[col];
        if f.abs() > 0.0 {
            for (a, b) in self.cost.iter_mut().zip(&pivot_row) {
                *a -= f * b;
            }
        }
        self.basis[row] = col;
    }

    /// Bland iteration loop over columns `0..limit`. Returns false if the
    /// problem is unbounded in the current phase.
    fn iterate(&mut self, limit: usize, max_iters: usize) -> Result<bool> {
        for _ in 0..max_iters {
            let Some(entering) = (0..limit).find(|&j| self.cost[j] < -TOL) else {
                return Ok(true);
            };
            let mut leaving: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..self.rows.len() {
                let a = self.rows[r][entering];
                if a > TOL {
                    let ratio = self.rows[r][self.n_total] / a;
                    let better = ratio < best_ratio - TOL
                        || (ratio < best_ratio + TOL
                            && leaving.map(|l| self.basis[r] < self.basis[l]).unwrap_or(true));
                    if better {
                        best_ratio = ratio.min(best_ratio);
                        leaving = Some(r);
                    }
                }
            }
            let Some(row) = leaving else {
                return Ok(false);
            };
            self.pivot(row, entering);
        }
        Err(Error::Solver("oracle simplex exceeded its iteration budget".into()))
    }
}

pub(crate) fn solve_dense(lp: &DenseLp) -> Result<LpOutcome> {
    let n = lp.costs.len();
    let m = lp.rows.len();
    debug_assert!(lp.rows.iter().all(|r| r.len() == n));
    debug_assert_eq!(lp.rhs.len(), m);
    let n_total = n + m;

    // Sign-normalize so b ≥ 0, then append one artificial per row.
    let mut rows = Vec::with_capacity(m);
    for (i, row) in lp.rows.iter().enumerate() {
        let flip = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        let mut full = vec![0.0; n_total + 1];
        for (j, &a) in row.iter().enumerate() {
            full[j] = flip * a;
        }
        full[n + i] = 1.0;
        full[n_total] = flip * lp.rhs[i];
        rows.push(full);
    }

    // Phase 1: minimize the artificial sum. With the artificial basis, the
    // reduced-cost row is the negated column sum of the constraint rows.
    let mut cost = vec![0.0; n_total + 1];
    for row in &rows {
        for (c, v) in cost.iter_mut().zip(row) {
            *c -= v;
        }
    }
    for j in n..n_total {
        cost[j] = 0.0;
    }
    let basis: Vec<usize> = (n..n_total).collect();
    let mut t = Tableau { rows, cost, basis, n_total };
    let max_iters = 10_000 * (n_total + 1);
    if !t.iterate(n_total, max_iters)? {
        return Err(Error::Solver("oracle phase 1 unbounded".into()));
    }
    let phase1 = -t.cost[n_total];
    if phase1 > 1e-7 {
        return Ok(LpOutcome::Infeasible);
    }

    // Drive leftover artificials out of the basis; rows that cannot pivot
    // on any structural column are redundant and dropped.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| t.rows[r][j].abs() > TOL) {
                t.pivot(r, col);
            } else {
                t.rows.remove(r);
                t.basis.remove(r);
                continue;
            }
        }
        r += 1;
    }

    // Phase 2 over structural columns only.
    let mut cost = vec![0.0; n_total + 1];
    for (j, &c) in lp.costs.iter().enumerate() {
        cost[j] = c;
    }
    for (r, row) in t.rows.iter().enumerate() {
        let cb = if t.basis[r] < n { lp.costs[t.basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for (a, b) in cost.iter_mut().zip(row) {
                *a -= cb * b;
            }
        }
    }
    t.cost = cost;
    if !t.iterate(n, max_iters)? {
        return Err(Error::Solver("oracle phase 2 unbounded".into()));
    }

    let mut x = vec![0.0; n];
    for (r, row) in t.rows.iter().enumerate() {
        if t.basis[r] < n {
            x[t.basis[r]] = row[t.n_total].max(0.0);
        }
    }
    let objective = lp.costs.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal { objective, x })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(costs: Vec<f64>, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> LpOutcome {
        solve_dense(&DenseLp { costs, rows, rhs }).unwrap()
    }

    #[test]
    fn solves_textbook_problem() {
        // min −3x − 5y s.t. x + s1 = 4, 2y + s2 = 12, 3x + 2y + s3 = 18.
        let out = solve(
            vec![-3.0, -5.0, 0.0, 0.0, 0.0],
            vec![
                vec![1.0, 0.0, 1.0, 0.0, 0.0],
                vec![0.0, 2.0, 0.0, 1.0, 0.0],
                vec![3.0, 2.0, 0.0, 0.0, 1.0],
            ],
            vec![4.0, 12.0, 18.0],
        );
        match out {
            LpOutcome::Optimal { objective, x } => {
                assert!((objective + 36.0).abs() < 1e-9);
                assert!((x[0] - 2.0).abs() < 1e-9);
                assert!((x[1] - 6.0).abs() < 1e-9);
            }
            LpOutcome::Infeasible => panic!("feasible problem reported infeasible"),
        }
    }

    #[test]
    fn detects_infeasibility() {
        // x = 1 and x = 2 simultaneously.
        let out = solve(
            vec![1.0],
            vec![vec![1.0], vec![1.0]],
            vec![1.0, 2.0],
        );
        assert!(matches!(out, LpOutcome::Infeasible));
    }

    #[test]
    fn handles_negative_rhs_by_normalization() {
        // −x = −5 → x = 5.
        let out = solve(vec![1.0], vec![vec![-1.0]], vec![-5.0]);
        match out {
            LpOutcome::Optimal { objective, x } => {
                assert!((x[0] - 5.0).abs() < 1e-9);
                assert!((objective - 5.0).abs() < 1e-9);
            }
            LpOutcome::Infeasible => panic!("unexpected infeasible"),
        }
    }

    #[test]
    fn drops_redundant_rows() {
        // Duplicate constraint rows: x + y = 2 twice.
        let out = solve(
            vec![1.0, 2.0],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![2.0, 2.0],
        );
        match out {
            LpOutcome::Optimal { objective, x } => {
                assert!((x[0] - 2.0).abs() < 1e-9);
                assert!((objective - 2.0).abs() < 1e-9);
            }
            LpOutcome::Infeasible => panic!("unexpected infeasible"),
        }
    }

    #[test]
    fn degenerate_problems_terminate() {
        // Degenerate vertex: multiple rows binding at the origin.
        let out = solve(
            vec![-1.0, -1.0, 0.0, 0.0, 0.0],
            vec![
                vec![1.0, 0.0, 1.0, 0.0, 0.0],
                vec![1.0, 1.0, 0.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 0.0, 1.0],
            ],
            vec![0.0, 1.0, 1.0],
        );
        match out {
            LpOutcome::Optimal { objective, .. } => {
                assert!((objective + 1.0).abs() < 1e-9);
            }
            LpOutcome::Infeasible => panic!("unexpected infeasible"),
        }
    }
}
