//! Dense two-phase primal simplex for linear programs over the probability
//! simplex:
//!
//! ```text
//! minimize c.g  subject to  D g <= 0,  sum(g) = 1,  g >= 0
//! ```
//!
//! The feasible set is compact, so the program is either infeasible or has an
//! optimal vertex. Bland's rule (lowest eligible index for both the entering
//! and the leaving variable) rules out cycling.

use crate::{Error, Result};

/// Entries below this magnitude are never pivoted on.
pub const PIVOT_TOL: f64 = 1e-11;
/// Feasibility tolerance for phase one and for reported constraint checks.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexLP {
    c: Vec<f64>,
    d: Vec<Vec<f64>>,
}

impl SimplexLP {
    pub fn new(c: Vec<f64>, d: Vec<Vec<f64>>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::Empty("linear program objective"));
        }
        for row in &d {
            Error::check_dim(c.len(), row.len())?;
        }
        if c.iter().chain(d.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear program coefficient".into()));
        }
        Ok(SimplexLP { c, d })
    }

    /// Objective only; the solution is the vertex at the smallest entry of `c`.
    pub fn unconstrained(c: Vec<f64>) -> Result<Self> {
        Self::new(c, Vec::new())
    }

    pub fn objective(&self) -> &[f64] {
        &self.c
    }

    pub fn constraints(&self) -> &[Vec<f64>] {
        &self.d
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    /// `D g`.
    pub fn constraint_values(&self, g: &[f64]) -> Vec<f64> {
        self.d
            .iter()
            .map(|row| row.iter().zip(g).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { gamma: Vec<f64>, objective: f64 },
    /// No point of the simplex satisfies `D g <= 0`. `violated` lists the
    /// rows that are positive at the vertex with the smallest worst-case row
    /// value.
    Infeasible { violated: Vec<usize> },
}

impl LpOutcome {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, LpOutcome::Infeasible { .. })
    }
}

struct Tableau {
    // rows x (cols + 1); last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.a[row][col];
        for v in self.a[row].iter_mut() {
            *v /= piv;
        }
        let prow = self.a[row].clone();
        for (r, line) in self.a.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, p) in line.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Reduced costs `c_j - c_B^T B^-1 A_j` over the first `active` columns.
    fn reduced_costs(&self, cost: &[f64], active: usize) -> Vec<f64> {
        (0..active)
            .map(|j| {
                let mut r = cost[j];
                for (row, &b) in self.a.iter().zip(&self.basis) {
                    r -= cost[b] * row[j];
                }
                r
            })
            .collect()
    }

    /// Runs Bland-rule iterations minimizing `cost` over columns `< active`.
    fn optimize(&mut self, cost: &[f64], active: usize) -> Result<()> {
        let rhs = self.cols;
        // Generous cap; Bland's rule terminates, this only guards bugs.
        let max_iter = 50 * (self.a.len() + active + 10) * (self.a.len() + 1);
        for _ in 0..max_iter {
            let rc = self.reduced_costs(cost, active);
            let Some(enter) = (0..active).find(|&j| rc[j] < -PIVOT_TOL && !self.basis.contains(&j))
            else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.a.iter().enumerate() {
                let coef = row[enter];
                if coef > PIVOT_TOL {
                    let ratio = row[rhs] / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-15
                                || (ratio <= lratio + 1e-15 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Solver(
                    "unbounded direction over a compact feasible set".into(),
                ));
            };
            self.pivot(row, enter);
        }
        Err(Error::Solver("simplex iteration limit reached".into()))
    }
}

/// Solves the program. `Infeasible` is an outcome, not an error; errors
/// signal numerical breakdown.
pub fn solve_lp(lp: &SimplexLP) -> Result<LpOutcome> {
    let n = lp.num_vars();
    let p = lp.d.len();
    // Columns: g (n), slacks (p), artificial (1).
    let cols = n + p + 1;
    let art = n + p;
    let mut a = Vec::with_capacity(p + 1);
    for (i, drow) in lp.d.iter().enumerate() {
        let mut row = vec![0.0; cols + 1];
        row[..n].copy_from_slice(drow);
        row[n + i] = 1.0;
        a.push(row);
    }
    let mut sum_row = vec![0.0; cols + 1];
    sum_row[..n].iter_mut().for_each(|v| *v = 1.0);
    sum_row[art] = 1.0;
    sum_row[cols] = 1.0;
    a.push(sum_row);
    let mut basis: Vec<usize> = (n..n + p).collect();
    basis.push(art);
    let mut t = Tableau { a, basis, cols };

    let mut phase1 = vec![0.0; cols];
    phase1[art] = 1.0;
    t.optimize(&phase1, cols)?;
    let art_level: f64 = t
        .basis
        .iter()
        .zip(&t.a)
        .filter(|(&b, _)| b == art)
        .map(|(_, row)| row[cols])
        .sum();
    if art_level > FEAS_TOL {
        return Ok(LpOutcome::Infeasible {
            violated: least_violating_rows(lp),
        });
    }
    // Drive a zero-level artificial out of the basis.
    if let Some(r) = t.basis.iter().position(|&b| b == art) {
        if let Some(c) = (0..art).find(|&c| t.a[r][c].abs() > PIVOT_TOL) {
            t.pivot(r, c);
        } else {
            t.a.remove(r);
            t.basis.remove(r);
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(&lp.c);
    t.optimize(&phase2, art)?;

    let mut gamma = vec![0.0; n];
    for (row, &b) in t.a.iter().zip(&t.basis) {
        if b < n {
            gamma[b] = row[cols];
        }
    }
    let objective = gamma.iter().zip(&lp.c).map(|(g, c)| g * c).sum();
    Ok(LpOutcome::Optimal { gamma, objective })
}

fn least_violating_rows(lp: &SimplexLP) -> Vec<usize> {
    let worst = |j: usize| lp.d.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
    let best = (0..lp.num_vars())
        .min_by(|&a, &b| worst(a).total_cmp(&worst(b)))
        .unwrap_or(0);
    lp.d
        .iter()
        .enumerate()
        .filter(|(_, r)| r[best] > FEAS_TOL)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(out: LpOutcome) -> (Vec<f64>, f64) {
        match out {
            LpOutcome::Optimal { gamma, objective } => (gamma, objective),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn vertex_of_simplex() {
        let (g, obj) = optimal(solve_lp(&SimplexLP::unconstrained(vec![3.0, 1.0, 2.0]).unwrap()).unwrap());
        assert_eq!(g, vec![0.0, 1.0, 0.0]);
        assert_eq!(obj, 1.0);
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let (g, _) = optimal(solve_lp(&SimplexLP::unconstrained(vec![2.0, 1.0, 1.0, 1.0]).unwrap()).unwrap());
        assert_eq!(g, vec![0.0, 1.0, 0.0, 0.0]);
        let (g, _) = optimal(solve_lp(&SimplexLP::unconstrained(vec![0.0, 0.0]).unwrap()).unwrap());
        assert_eq!(g, vec![1.0, 0.0]);
    }

    #[test]
    fn equality_blocked_mass() {
        let lp = SimplexLP::new(vec![0.0, 1.0], vec![vec![1.0, -1.0]]).unwrap();
        let (g, obj) = optimal(solve_lp(&lp).unwrap());
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] - 0.5).abs() < 1e-12);
        assert!((obj - 0.5).abs() < 1e-12);
    }

    #[test]
    fn positive_row_is_infeasible() {
        let lp = SimplexLP::new(vec![0.3, -2.0], vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!(
            solve_lp(&lp).unwrap(),
            LpOutcome::Infeasible { violated: vec![0] }
        );
    }

    #[test]
    fn input_validation() {
        assert!(SimplexLP::new(vec![], vec![]).is_err());
        assert!(SimplexLP::new(vec![1.0], vec![vec![1.0, 2.0]]).is_err());
        assert!(SimplexLP::new(vec![f64::NAN], vec![]).is_err());
    }

    #[test]
    fn degenerate_rows_do_not_cycle() {
        // Many redundant zero-rhs rows make every pivot degenerate.
        let d = vec![
            vec![1.0, -1.0, 0.0, 0.0],
            vec![1.0, -1.0, 0.0, 0.0],
            vec![0.0, 1.0, -1.0, 0.0],
            vec![2.0, -2.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, -1.0],
        ];
        let lp = SimplexLP::new(vec![-1.0, -1.0, -1.0, 0.0], d).unwrap();
        let (g, obj) = optimal(solve_lp(&lp).unwrap());
        // g1 <= g2 <= g3 <= g4: best is the uniform point, objective -3/4.
        assert!((obj + 0.75).abs() < 1e-12, "{obj} {g:?}");
    }
}
