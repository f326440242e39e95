//! Bounded revised simplex, two phases, dense basis inverse.
//!
//! Rows are `A_eq x = b_eq` followed by `A_in x + s = b_in` with slacks
//! `s ≥ 0`. Nonbasic variables sit at a finite bound, or at zero when free.
//! Pricing is Dantzig's rule, switching to Bland's rule after a streak of
//! degenerate steps.

use nalgebra::{DMatrix, DVector};

use super::{SolveStats, SolveStatus, REFACTOR_EVERY};
use crate::error::{check_len, Error, Result};
use crate::linalg::BasisInverse;

const DEGENERATE_STREAK: usize = 20;
const PIVOT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    c: DVector<f64>,
    a_eq: DMatrix<f64>,
    b_eq: DVector<f64>,
    a_in: DMatrix<f64>,
    b_in: DVector<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl LinearProgram {
    /// `min cᵀx` subject to `x ≥ 0` until constraints are added.
    pub fn new(c: DVector<f64>) -> Self {
        let n = c.len();
        Self {
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
            lower: DVector::zeros(n),
            upper: DVector::from_element(n, f64::INFINITY),
            c,
        }
    }

    /// Replaces the equality block `A x = b`.
    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    /// Replaces the inequality block `A x ≤ b`.
    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    /// Replaces the bounds; infinite entries are allowed.
    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        check_len("equality columns", n, self.a_eq.ncols())?;
        check_len("equality rhs", self.a_eq.nrows(), self.b_eq.len())?;
        check_len("inequality columns", n, self.a_in.ncols())?;
        check_len("inequality rhs", self.a_in.nrows(), self.b_in.len())?;
        check_len("lower bounds", n, self.lower.len())?;
        check_len("upper bounds", n, self.upper.len())?;
        let data = self
            .c
            .iter()
            .chain(self.a_eq.iter())
            .chain(self.b_eq.iter())
            .chain(self.a_in.iter())
            .chain(self.b_in.iter());
        if data.clone().any(|v| !v.is_finite()) {
            return Err(Error::ParameterOutOfRange("LP data must be finite".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::ParameterOutOfRange(format!("bad bounds on variable {j}")));
            }
            if l > u {
                return Err(Error::InfeasibleSet);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub value: f64,
    pub stats: SolveStats,
}

struct Tableau {
    cols: DMatrix<f64>,
    rhs: DVector<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: DVector<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    inv: BasisInverse,
    stats: SolveStats,
    since_refactor: usize,
    limit: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    Limit,
}

impl Tableau {
    fn refactor(&mut self) -> Result<()> {
        let m = self.rhs.len();
        let b = DMatrix::from_fn(m, m, |i, k| self.cols[(i, self.basis[k])]);
        self.inv = BasisInverse::factor(&b)
            .ok_or_else(|| Error::Internal("singular simplex basis".into()))?;
        let mut r = self.rhs.clone();
        for j in 0..self.x.len() {
            if !self.is_basic[j] && self.x[j] != 0.0 {
                r.axpy(-self.x[j], &self.cols.column(j), 1.0);
            }
        }
        let xb = self.inv.ftran(&r);
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[k];
        }
        self.stats.refactorization_count += 1;
        self.since_refactor = 0;
        Ok(())
    }

    fn run(&mut self, cost: &DVector<f64>) -> Result<Outcome> {
        let total = self.x.len();
        let m = self.rhs.len();
        let dtol = 1e-9 * (1.0 + cost.amax());
        let mut streak = 0usize;
        loop {
            if self.stats.pivot_count >= self.limit {
                return Ok(Outcome::Limit);
            }
            let cb = DVector::from_fn(m, |k, _| cost[self.basis[k]]);
            let y = self.inv.btran(&cb);
            let bland = streak >= DEGENERATE_STREAK;
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..total {
                if self.is_basic[j] || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = cost[j] - y.dot(&self.cols.column(j));
                let at_lo = self.x[j] == self.lo[j];
                let at_hi = self.x[j] == self.hi[j];
                let sigma = if d < -dtol && !at_hi {
                    1.0
                } else if d > dtol && !at_lo {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, sigma, d));
                    break;
                }
                if entering.is_none_or(|(_, _, best)| d.abs() > best.abs()) {
                    entering = Some((j, sigma, d));
                }
            }
            let Some((j, sigma, _)) = entering else {
                return Ok(Outcome::Optimal);
            };
            let alpha = self.inv.ftran(&self.cols.column(j).into_owned());
            let amax = alpha.amax().max(1.0);
            let mut step = self.hi[j] - self.lo[j];
            let mut leave: Option<(usize, bool)> = None;
            for k in 0..m {
                let rate = sigma * alpha[k];
                let b = self.basis[k];
                let (t, to_lower) = if rate > PIVOT_TOL * amax && self.lo[b].is_finite() {
                    (((self.x[b] - self.lo[b]) / rate).max(0.0), true)
                } else if rate < -PIVOT_TOL * amax && self.hi[b].is_finite() {
                    (((self.hi[b] - self.x[b]) / -rate).max(0.0), false)
                } else {
                    continue;
                };
                let better = match leave {
                    None => t < step,
                    Some((best, _)) => {
                        if bland {
                            t < step || (t == step && b < self.basis[best])
                        } else {
                            t < step || (t == step && alpha[k].abs() > alpha[best].abs())
                        }
                    }
                };
                if better {
                    step = t;
                    leave = Some((k, to_lower));
                }
            }
            if !step.is_finite() {
                return Ok(Outcome::Unbounded);
            }
            for k in 0..m {
                let b = self.basis[k];
                self.x[b] -= sigma * step * alpha[k];
            }
            self.x[j] += sigma * step;
            self.stats.pivot_count += 1;
            streak = if step <= 1e-12 { streak + 1 } else { 0 };
            match leave {
                None => {
                    // Bound flip.
                    self.x[j] = if sigma > 0.0 { self.hi[j] } else { self.lo[j] };
                }
                Some((k, to_lower)) => {
                    let b = self.basis[k];
                    self.x[b] = if to_lower { self.lo[b] } else { self.hi[b] };
                    self.inv.pivot(k, &alpha);
                    self.basis[k] = j;
                    self.is_basic[b] = false;
                    self.is_basic[j] = true;
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY {
                        self.refactor()?;
                    }
                }
            }
        }
    }

    /// Pivot basic artificials out where some structural column allows it.
    fn drive_out(&mut self, first_artificial: usize) -> Result<()> {
        let m = self.rhs.len();
        for k in 0..m {
            if self.basis[k] < first_artificial {
                continue;
            }
            let row: Vec<f64> = (0..m).map(|c| self.inv.entry(k, c)).collect();
            let row = DVector::from_vec(row);
            let pick = (0..first_artificial)
                .filter(|&j| !self.is_basic[j])
                .map(|j| (j, row.dot(&self.cols.column(j)).abs()))
                .filter(|&(_, v)| v > 1e-7)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, _)) = pick {
                let alpha = self.inv.ftran(&self.cols.column(j).into_owned());
                let b = self.basis[k];
                self.inv.pivot(k, &alpha);
                self.basis[k] = j;
                self.is_basic[b] = false;
                self.is_basic[j] = true;
                self.x[b] = 0.0;
                self.stats.pivot_count += 1;
            }
        }
        self.refactor()
    }
}

/// Optimal basic solution of `lp`.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    let (me, mi) = (lp.a_eq.nrows(), lp.a_in.nrows());
    let m = me + mi;
    let structural = n + mi;
    let total = structural + m;

    let mut rhs = DVector::zeros(m);
    rhs.rows_mut(0, me).copy_from(&lp.b_eq);
    rhs.rows_mut(me, mi).copy_from(&lp.b_in);
    let mut cols = DMatrix::zeros(m, total);
    cols.view_mut((0, 0), (me, n)).copy_from(&lp.a_eq);
    cols.view_mut((me, 0), (mi, n)).copy_from(&lp.a_in);
    let mut lo = vec![0.0; total];
    let mut hi = vec![f64::INFINITY; total];
    let mut x = DVector::zeros(total);
    for j in 0..n {
        lo[j] = lp.lower[j];
        hi[j] = lp.upper[j];
        x[j] = if lo[j].is_finite() {
            lo[j]
        } else if hi[j].is_finite() {
            hi[j]
        } else {
            0.0
        };
    }
    for i in 0..mi {
        cols[(me + i, n + i)] = 1.0;
    }
    let residual = &rhs - cols.columns(0, n) * x.rows(0, n);

    // Crash: a slack where it is nonnegative, an artificial elsewhere.
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        let art = structural + i;
        if i >= me && residual[i] >= 0.0 {
            basis.push(n + (i - me));
            hi[art] = 0.0;
        } else {
            cols[(i, art)] = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
            basis.push(art);
        }
    }
    let mut is_basic = vec![false; total];
    for &b in &basis {
        is_basic[b] = true;
    }
    let mut t = Tableau {
        cols,
        rhs,
        lo,
        hi,
        x,
        basis,
        is_basic,
        inv: BasisInverse::identity(m),
        stats: SolveStats::new(),
        since_refactor: 0,
        limit: 50 * (m + total) + 1000,
    };
    t.refactor()?;

    let limit_err = |t: &Tableau| Error::SolverFailure {
        status: SolveStatus::IterationLimit,
        pivots: t.stats.pivot_count,
    };

    let phase1_cost = DVector::from_fn(total, |j, _| if j >= structural { 1.0 } else { 0.0 });
    if phase1_cost.rows(structural, m).dot(&t.x.rows(structural, m)) > 0.0 {
        match t.run(&phase1_cost)? {
            Outcome::Optimal => {}
            Outcome::Limit => return Err(limit_err(&t)),
            Outcome::Unbounded => return Err(Error::Internal("unbounded phase one".into())),
        }
        let infeas: f64 = t.x.rows(structural, m).sum();
        if infeas > PHASE1_TOL * (1.0 + t.rhs.amax()) {
            return Err(Error::InfeasibleSet);
        }
    }
    for j in structural..total {
        t.lo[j] = 0.0;
        t.hi[j] = 0.0;
    }
    t.drive_out(structural)?;

    let mut cost = DVector::zeros(total);
    cost.rows_mut(0, n).copy_from(&lp.c);
    match t.run(&cost)? {
        Outcome::Optimal => {}
        Outcome::Limit => return Err(limit_err(&t)),
        Outcome::Unbounded => return Err(Error::Unbounded),
    }
    t.refactor()?;
    let xs = DVector::from_fn(n, |j, _| t.x[j].clamp(lp.lower[j], lp.upper[j]));
    Ok(LpSolution {
        value: lp.c.dot(&xs),
        x: xs,
        stats: t.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn minimize_over_unit_interval() {
        let lp = LinearProgram::new(v(&[1.0])).with_bounds(v(&[0.0]), v(&[1.0]));
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.x, v(&[0.0]));
        assert_eq!(sol.value, 0.0);
    }

    #[test]
    fn box_sign_rule() {
        let lp = LinearProgram::new(v(&[1.0, -1.0])).with_bounds(v(&[0.0, 0.0]), v(&[1.0, 1.0]));
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.x, v(&[0.0, 1.0]));
        assert_eq!(sol.value, -1.0);
    }

    #[test]
    fn inequality_constrained() {
        // max x + y s.t. x + 2y ≤ 4, 3x + y ≤ 6, x, y ≥ 0 → (1.6, 1.2).
        let lp = LinearProgram::new(v(&[-1.0, -1.0])).with_inequalities(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]),
            v(&[4.0, 6.0]),
        );
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.x - v(&[1.6, 1.2])).amax() < 1e-12);
        assert!((sol.value + 2.8).abs() < 1e-12);
    }

    #[test]
    fn equalities_and_free_variables() {
        // min |x| style: x = p − m, p + m minimal with x fixed by equality.
        let lp = LinearProgram::new(v(&[0.0, 1.0]))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), v(&[3.0]))
            .with_bounds(v(&[f64::NEG_INFINITY, 0.0]), v(&[2.0, f64::INFINITY]));
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.x - v(&[2.0, 1.0])).amax() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let infeasible = LinearProgram::new(v(&[1.0]))
            .with_inequalities(DMatrix::from_row_slice(1, 1, &[1.0]), v(&[-1.0]));
        assert_eq!(solve_lp(&infeasible), Err(Error::InfeasibleSet));
        let unbounded = LinearProgram::new(v(&[-1.0]));
        assert_eq!(solve_lp(&unbounded), Err(Error::Unbounded));
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram::new(v(&[1.0, 2.0]))
            .with_equalities(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]), v(&[1.0, 2.0]));
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.x - v(&[1.0, 0.0])).amax() < 1e-12);
    }
}
