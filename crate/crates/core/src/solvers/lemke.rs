//! Lemke's complementary pivoting method.
//!
//! The LCP is `w = T z + r`, `w, z ≥ 0`, `wᵀz = 0`. The engine works on the
//! system `I w − T z − d z₀ = r` with an explicit basis inverse and accepts
//! any nonsingular complementary starting basis together with a covering
//! vector `d`; the classical method is the special case `B = I`, `d = 1`.

use nalgebra::{DMatrix, DVector};

use super::{SolveStats, SolveStatus, COMPL_TOL, FEAS_TOL, REFACTOR_EVERY};
use crate::error::{check_len, Error, Result};
use crate::linalg::{BasisInverse, ZERO_PIVOT};
use crate::rng::{derive_seed, rng_from_seed, uniform01};

const RATIO_TIE: f64 = 1e-9;
const DRIFT_TOL: f64 = 1e-9;
const DRIFT_CHECK_EVERY: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LcpInstance {
    pub t: DMatrix<f64>,
    pub r: DVector<f64>,
}

impl LcpInstance {
    pub fn new(t: DMatrix<f64>, r: DVector<f64>) -> Result<Self> {
        check_len("LCP matrix rows", r.len(), t.nrows())?;
        check_len("LCP matrix columns", r.len(), t.ncols())?;
        if t.iter().chain(r.iter()).any(|v| !v.is_finite()) {
            return Err(Error::ParameterOutOfRange("LCP data must be finite".into()));
        }
        Ok(Self { t, r })
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn w(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.t * z + &self.r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcpSolution {
    pub z: DVector<f64>,
    pub w: DVector<f64>,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Var {
    W(usize),
    Z(usize),
    Z0,
}

fn var_key(v: &Var) -> (u8, usize) {
    match *v {
        Var::W(i) => (0, i),
        Var::Z(j) => (1, j),
        Var::Z0 => (2, 0),
    }
}

impl Var {
    fn complement(self) -> Var {
        match self {
            Var::W(i) => Var::Z(i),
            Var::Z(i) => Var::W(i),
            Var::Z0 => unreachable!("z0 has no complement"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum PathFailure {
    /// Starting basis singular, or the covering vector cannot repair it.
    BadStart,
    Ray(SolveStats),
    /// The path returned to its first vertex. Only possible when `z₀`
    /// is not free to grow without bound from the start.
    Loop(SolveStats),
    IterationLimit(SolveStats),
    /// Terminated but the complementarity check failed.
    Numerical(SolveStats),
}

impl PathFailure {
    pub(crate) fn stats(&self) -> Option<SolveStats> {
        match self {
            PathFailure::BadStart => None,
            PathFailure::Ray(s)
            | PathFailure::Loop(s)
            | PathFailure::IterationLimit(s)
            | PathFailure::Numerical(s) => Some(*s),
        }
    }
}

struct Path<'a> {
    t: &'a DMatrix<f64>,
    r: &'a DVector<f64>,
    d: &'a DVector<f64>,
    basis: Vec<Var>,
    inv: BasisInverse,
    beta: DVector<f64>,
    stats: SolveStats,
    since_refactor: usize,
    /// Starting basis matrix, defining the lexicographic perturbation.
    b0: DMatrix<f64>,
}

impl<'a> Path<'a> {
    fn column(&self, v: Var) -> DVector<f64> {
        let n = self.r.len();
        match v {
            Var::W(i) => {
                let mut e = DVector::zeros(n);
                e[i] = 1.0;
                e
            }
            Var::Z(j) => -self.t.column(j),
            Var::Z0 => -self.d,
        }
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.basis.iter().map(|&v| self.column(v)).collect();
        DMatrix::from_columns(&cols)
    }

    fn refactor(&mut self) -> bool {
        match BasisInverse::factor(&self.basis_matrix()) {
            Some(inv) => {
                self.inv = inv;
                self.beta = self.inv.ftran(self.r);
                self.stats.refactorization_count += 1;
                self.since_refactor = 0;
                true
            }
            None => false,
        }
    }

    fn drift(&self) -> f64 {
        let mut res = -self.r.clone();
        for (i, &v) in self.basis.iter().enumerate() {
            let b = self.beta[i];
            match v {
                Var::W(k) => res[k] += b,
                Var::Z(j) => res.axpy(-b, &self.t.column(j), 1.0),
                Var::Z0 => res.axpy(-b, self.d, 1.0),
            }
        }
        res.amax() / (1.0 + self.r.amax())
    }

    fn pivot(&mut self, row: usize, alpha: &DVector<f64>, entering: Var) -> Var {
        let theta = self.beta[row] / alpha[row];
        for i in 0..self.beta.len() {
            if i != row {
                self.beta[i] -= alpha[i] * theta;
            }
        }
        self.beta[row] = theta;
        self.inv.pivot(row, alpha);
        let leaving = std::mem::replace(&mut self.basis[row], entering);
        self.stats.pivot_count += 1;
        self.since_refactor += 1;
        leaving
    }

    /// Row `i` of `B⁻¹ B₀` divided by `alpha_i`. The right-hand side is
    /// perturbed by `B₀ (ε, ε², …)`, which makes the starting point
    /// lexicographically positive for any starting basis `B₀`.
    fn lexico_row(&self, i: usize, alpha: &DVector<f64>) -> DVector<f64> {
        let n = self.beta.len();
        let row = DVector::from_fn(n, |j, _| self.inv.entry(i, j));
        self.b0.tr_mul(&row) / alpha[i]
    }

    /// Among `rows`, the lexicographically smallest (or largest) scaled row.
    fn lexico_pick(&self, rows: &[usize], alpha: &DVector<f64>, largest: bool) -> usize {
        let mut best = rows[0];
        if rows.len() == 1 {
            return best;
        }
        let mut best_row = self.lexico_row(best, alpha);
        for &i in &rows[1..] {
            let cand = self.lexico_row(i, alpha);
            for (a, b) in cand.iter().zip(best_row.iter()) {
                if (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    continue;
                }
                if (*a < *b) != largest {
                    best = i;
                    best_row = cand;
                }
                break;
            }
        }
        best
    }
}

/// Which way `z₀` moves when it first enters the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    /// Enter at the smallest feasible `z₀` and follow the path from there.
    Down,
    /// Enter at the largest feasible `z₀`; fails with `Ray` when `z₀` is
    /// unbounded above.
    Up,
}

/// Follow the almost-complementary path from a complementary `basis` with
/// covering vector `d`.
pub(crate) fn run_path(
    t: &DMatrix<f64>,
    r: &DVector<f64>,
    d: &DVector<f64>,
    basis: Vec<Var>,
    direction: Direction,
    max_pivots: usize,
) -> std::result::Result<(DVector<f64>, SolveStats), PathFailure> {
    let n = r.len();
    let mut path = Path {
        t,
        r,
        d,
        basis,
        inv: BasisInverse::identity(n),
        beta: DVector::zeros(n),
        stats: SolveStats::new(),
        since_refactor: 0,
        b0: DMatrix::zeros(0, 0),
    };
    if n == 0 {
        return Ok((DVector::zeros(0), path.stats));
    }
    path.b0 = path.basis_matrix();
    if !path.refactor() {
        return Err(PathFailure::BadStart);
    }
    let accept = 1e-10 * (1.0 + r.amax());

    if path.beta.iter().any(|&b| b < -accept) {
        // z0 enters; the most negative (scaled) basic variable leaves.
        let delta = path.inv.ftran(d);
        let dmax = delta.amax().max(1.0);
        if (0..n).any(|i| path.beta[i] < -accept && delta[i] <= ZERO_PIVOT * dmax) {
            return Err(PathFailure::BadStart);
        }
        let alpha = -delta;
        let row = match direction {
            // Lowest z0 at which every basic variable is nonnegative.
            Direction::Down => {
                let rows: Vec<usize> = (0..n).filter(|&i| alpha[i] < -ZERO_PIVOT * dmax).collect();
                let ratio = |i: usize| path.beta[i] / alpha[i];
                let best = rows.iter().map(|&i| ratio(i)).fold(f64::NEG_INFINITY, f64::max);
                let ties: Vec<usize> = rows
                    .into_iter()
                    .filter(|&i| ratio(i) >= best - RATIO_TIE * (1.0 + best.abs()))
                    .collect();
                path.lexico_pick(&ties, &alpha, true)
            }
            // Highest z0 before some basic variable turns negative.
            Direction::Up => {
                let rows: Vec<usize> = (0..n).filter(|&i| alpha[i] > ZERO_PIVOT * dmax).collect();
                if rows.is_empty() {
                    path.stats.status = SolveStatus::RayTermination;
                    return Err(PathFailure::Ray(path.stats));
                }
                let ratio = |i: usize| path.beta[i].max(0.0) / alpha[i];
                let best = rows.iter().map(|&i| ratio(i)).fold(f64::INFINITY, f64::min);
                let ties: Vec<usize> = rows
                    .into_iter()
                    .filter(|&i| ratio(i) <= best + RATIO_TIE * (1.0 + best))
                    .collect();
                path.lexico_pick(&ties, &alpha, false)
            }
        };
        let first_leaving = path.pivot(row, &alpha, Var::Z0);
        let mut first_basis = path.basis.clone();
        first_basis.sort_by_key(var_key);
        let mut entering = first_leaving.complement();

        loop {
            if path.stats.pivot_count >= max_pivots {
                path.stats.status = SolveStatus::IterationLimit;
                return Err(PathFailure::IterationLimit(path.stats));
            }
            let alpha = path.inv.ftran(&path.column(entering));
            let amax = alpha.amax().max(1.0);
            let mut min_ratio = f64::INFINITY;
            for i in 0..n {
                if alpha[i] > ZERO_PIVOT * amax {
                    min_ratio = min_ratio.min(path.beta[i].max(0.0) / alpha[i]);
                }
            }
            if !min_ratio.is_finite() {
                path.stats.status = SolveStatus::RayTermination;
                return Err(PathFailure::Ray(path.stats));
            }
            let ties: Vec<usize> = (0..n)
                .filter(|&i| {
                    alpha[i] > ZERO_PIVOT * amax
                        && path.beta[i].max(0.0) / alpha[i]
                            <= min_ratio + RATIO_TIE * (1.0 + min_ratio)
                })
                .collect();
            let row = match ties.iter().find(|&&i| path.basis[i] == Var::Z0) {
                Some(&i) => i,
                None => path.lexico_pick(&ties, &alpha, false),
            };
            let leaving = path.pivot(row, &alpha, entering);
            if leaving == Var::Z0 {
                break;
            }
            if leaving == first_leaving {
                let mut now = path.basis.clone();
                now.sort_by_key(var_key);
                if now == first_basis {
                    path.stats.status = SolveStatus::RayTermination;
                    return Err(PathFailure::Loop(path.stats));
                }
            }
            entering = leaving.complement();

            let due = path.since_refactor >= REFACTOR_EVERY
                || (path.since_refactor.is_multiple_of(DRIFT_CHECK_EVERY) && path.drift() > DRIFT_TOL);
            if due && !path.refactor() {
                path.stats.status = SolveStatus::IterationLimit;
                return Err(PathFailure::Numerical(path.stats));
            }
        }
        if !path.refactor() {
            return Err(PathFailure::Numerical(path.stats));
        }
    }

    let mut z = DVector::zeros(n);
    for (i, &v) in path.basis.iter().enumerate() {
        if let Var::Z(j) = v {
            z[j] = path.beta[i].max(0.0);
        }
    }
    let w = t * &z + r;
    let scale = 1.0 + r.amax();
    let ok = w.min() >= -FEAS_TOL * scale && w.dot(&z).abs() <= COMPL_TOL * scale;
    path.stats.status = SolveStatus::Solved;
    if !ok {
        return Err(PathFailure::Numerical(path.stats));
    }
    Ok((z, path.stats))
}

fn failure_error(f: &PathFailure, total: &SolveStats) -> Error {
    let status = match f {
        PathFailure::IterationLimit(_) => SolveStatus::IterationLimit,
        _ => SolveStatus::RayTermination,
    };
    Error::SolverFailure {
        status,
        pivots: total.pivot_count,
    }
}

/// Classical Lemke: trivial starting basis, covering vector of ones, and one
/// restart with a random positive covering vector after ray termination.
pub fn lemke_solve(lcp: &LcpInstance, max_pivots: usize) -> Result<LcpSolution> {
    let n = lcp.dim();
    let basis: Vec<Var> = (0..n).map(Var::W).collect();
    let mut total = SolveStats::new();
    let ones = DVector::from_element(n, 1.0);
    let first = run_path(&lcp.t, &lcp.r, &ones, basis.clone(), Direction::Down, max_pivots);
    let outcome = match first {
        Ok(ok) => Ok(ok),
        Err(PathFailure::IterationLimit(s)) => {
            total.absorb(&s);
            return Err(failure_error(&PathFailure::IterationLimit(s), &total));
        }
        Err(f) => {
            if let Some(s) = f.stats() {
                total.absorb(&s);
            }
            total.restarts += 1;
            let mut rng = rng_from_seed(derive_seed(0x1E3E, &[n as u64]));
            let d = DVector::from_fn(n, |_, _| 0.5 + uniform01(&mut rng));
            run_path(&lcp.t, &lcp.r, &d, basis, Direction::Down, max_pivots)
        }
    };
    match outcome {
        Ok((z, s)) => {
            total.absorb(&s);
            total.status = SolveStatus::Solved;
            let w = lcp.w(&z);
            Ok(LcpSolution { z, w, stats: total })
        }
        Err(f) => {
            if let Some(s) = f.stats() {
                total.absorb(&s);
            }
            Err(failure_error(&f, &total))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcp(t: &[f64], r: &[f64]) -> LcpInstance {
        let n = r.len();
        LcpInstance::new(DMatrix::from_row_slice(n, n, t), DVector::from_vec(r.to_vec())).unwrap()
    }

    #[test]
    fn identity_lcp() {
        let sol = lemke_solve(&lcp(&[1.0, 0.0, 0.0, 1.0], &[-1.0, -2.0]), 100).unwrap();
        assert!((sol.z - DVector::from_vec(vec![1.0, 2.0])).amax() < 1e-12);
        assert!(sol.w.amax() < 1e-12);
    }

    #[test]
    fn nonnegative_rhs_needs_no_pivots() {
        let sol = lemke_solve(&lcp(&[2.0, 1.0, -1.0, 3.0], &[0.5, 0.0]), 100).unwrap();
        assert_eq!(sol.z, DVector::zeros(2));
        assert_eq!(sol.stats.pivot_count, 0);
    }

    #[test]
    fn small_psd_instance() {
        let sol = lemke_solve(&lcp(&[2.0, 1.0, 1.0, 2.0], &[-5.0, -6.0]), 100).unwrap();
        // Interior solution of 2z1 + z2 = 5, z1 + 2z2 = 6.
        assert!((sol.z - DVector::from_vec(vec![4.0 / 3.0, 7.0 / 3.0])).amax() < 1e-12);
        assert_eq!(sol.stats.status, SolveStatus::Solved);
    }

    #[test]
    fn infeasible_lcp_reports_ray() {
        // w = -z - 1 can never be nonnegative.
        let err = lemke_solve(&lcp(&[-1.0], &[-1.0]), 100).unwrap_err();
        assert!(matches!(
            err,
            Error::SolverFailure {
                status: SolveStatus::RayTermination,
                ..
            }
        ));
    }

    #[test]
    fn rejects_mismatched_data() {
        assert!(LcpInstance::new(DMatrix::zeros(2, 3), DVector::zeros(2)).is_err());
    }
}
