//! AVIs over compact polytopes as LCPs through their KKT conditions.
//!
//! With `y = x − L`, `G = [A; I]` and `h = [b − A L; U − L]` the AVI is the
//! LCP in `z = (y, λ)`:
//!
//! ```text
//! w₁ = M y + Gᵀλ + (q + M L) ⊥ y ≥ 0
//! w₂ = −G y + h              ⊥ λ ≥ 0
//! ```
//!
//! Warm starts first check a complementary basis crashed from the active set
//! at `x0`. Failing that, the Lemke path starts at an LP vertex whose
//! objective is the map `F` evaluated near `x0`: a solution `x*` also solves
//! the AVI with `q` shifted by any nonnegative multiple of `F(x*)`, so the
//! path is short when `x0` is close to a solution. Every covering vector
//! used vanishes on the constraint rows, so `K` itself is never relaxed.

use nalgebra::{DMatrix, DVector};

use super::lemke::{run_path, Direction, LcpInstance, PathFailure, Var};
use super::{SolveStats, SolveStatus};
use crate::avi::AviProblem;
use crate::error::{check_len, Error, Result};
use crate::rng::{derive_seed, rng_from_seed, standard_normal};
use super::simplex::{solve_lp, LinearProgram};

/// A constraint within this distance of being tight is treated as active.
const ACTIVE_TOL: f64 = 1e-6;

/// Relative slack under which a row is active at an LP vertex.
const VERTEX_ACTIVE_TOL: f64 = 1e-9;

const VERTEX_DRAWS: u64 = 4;

/// Relative size of the perturbation in the informed vertex objective.
const INFORMED_NOISE: f64 = 1e-3;

/// Relative residual below which a row normal counts as dependent.
const INDEPENDENCE_TOL: f64 = 1e-8;

/// Slack target for tight rows left out of the crash basis.
const MIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AviSolveOptions {
    /// Pivot budget per Lemke path.
    pub max_pivots: usize,
}

impl Default for AviSolveOptions {
    fn default() -> Self {
        Self {
            max_pivots: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AviSolution {
    pub x: DVector<f64>,
    pub stats: SolveStats,
}

/// Inverse map from LCP variables back to the AVI variable.
#[derive(Debug, Clone, PartialEq)]
pub struct LcpEmbedding {
    pub n: usize,
    /// Number of general rows `A`.
    pub m: usize,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl LcpEmbedding {
    /// LCP size `2n + m`.
    pub fn lcp_dim(&self) -> usize {
        2 * self.n + self.m
    }

    /// `x = L + z[0..n]`, clamped onto the box against roundoff.
    pub fn recover_x(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |j, _| {
            (self.lower[j] + z[j]).clamp(self.lower[j], self.upper[j])
        })
    }
}

fn constraint_rows(avi: &AviProblem) -> (DMatrix<f64>, DVector<f64>) {
    let k = avi.polytope();
    let (n, m) = (k.dim(), k.num_rows());
    let mut g = DMatrix::zeros(m + n, n);
    g.rows_mut(0, m).copy_from(k.a());
    for j in 0..n {
        g[(m + j, j)] = 1.0;
    }
    let mut h = DVector::zeros(m + n);
    h.rows_mut(0, m).copy_from(&(k.b() - k.a() * k.lower()));
    h.rows_mut(m, n).copy_from(&(k.upper() - k.lower()));
    (g, h)
}

/// KKT reduction of `AVI(K, M, q)` to an LCP of size `2n + m`.
pub fn avi_to_lcp(avi: &AviProblem) -> (LcpInstance, LcpEmbedding) {
    let k = avi.polytope();
    let (n, m) = (k.dim(), k.num_rows());
    let (g, h) = constraint_rows(avi);
    let size = 2 * n + m;
    let mut t = DMatrix::zeros(size, size);
    t.view_mut((0, 0), (n, n)).copy_from(avi.m());
    t.view_mut((0, n), (n, m + n)).copy_from(&g.transpose());
    t.view_mut((n, 0), (m + n, n)).copy_from(&(-&g));
    let mut r = DVector::zeros(size);
    r.rows_mut(0, n).copy_from(&avi.affine_map(k.lower()));
    r.rows_mut(n, m + n).copy_from(&h);
    let embedding = LcpEmbedding {
        n,
        m,
        lower: k.lower().clone(),
        upper: k.upper().clone(),
    };
    (LcpInstance { t, r }, embedding)
}

/// Complementary basis and strictly positive target values built from `x0`.
struct Crash {
    basis: Vec<Var>,
    target: DVector<f64>,
}

/// Crash basis at the projection of `x0` onto the bounds.
///
/// Tight rows enter the basis, largest estimated multiplier first, while
/// their normals restricted to the free coordinates stay independent;
/// otherwise the basis would be singular. Targets for the `y` and slack
/// variables are their values at the point, so the covering vector vanishes
/// on the constraint rows whenever the point lies in `K`.
fn crash_from_point(avi: &AviProblem, g: &DMatrix<f64>, h: &DVector<f64>, x0: &DVector<f64>) -> Crash {
    let k = avi.polytope();
    let n = k.dim();
    let rows = g.nrows();
    let width = k.upper() - k.lower();
    let mut y = DVector::from_fn(n, |j, _| x0[j].clamp(k.lower()[j], k.upper()[j]) - k.lower()[j]);
    for j in 0..n {
        if y[j] <= ACTIVE_TOL {
            y[j] = 0.0;
        } else if width[j] - y[j] <= ACTIVE_TOL {
            y[j] = width[j];
        }
    }
    let slack = h - g * &y;
    let f = avi.affine_map(&(k.lower() + &y));
    let fill = 1.0 + f.amax();
    let gf = g * &f;
    let free: Vec<bool> = (0..n).map(|j| y[j] > 0.0).collect();
    let multiplier = |i: usize| -gf[i] / g.row(i).norm_squared().max(f64::MIN_POSITIVE);
    let mut candidates: Vec<usize> = (0..rows).filter(|&i| slack[i] <= ACTIVE_TOL).collect();
    candidates.sort_by(|&a, &b| multiplier(b).total_cmp(&multiplier(a)));
    let mut chosen: Vec<DVector<f64>> = Vec::new();
    let mut active = vec![false; rows];
    for &i in &candidates {
        let mut v = DVector::from_fn(n, |j, _| if free[j] { g[(i, j)] } else { 0.0 });
        let norm = v.norm();
        for qv in &chosen {
            let c = qv.dot(&v);
            v.axpy(-c, qv, 1.0);
        }
        let rest = v.norm();
        if rest > INDEPENDENCE_TOL * norm.max(f64::MIN_POSITIVE) {
            chosen.push(v / rest);
            active[i] = true;
        }
    }

    let mut basis = Vec::with_capacity(n + rows);
    let mut target = DVector::zeros(n + rows);
    for j in 0..n {
        if free[j] {
            basis.push(Var::Z(j));
            target[j] = y[j];
        } else {
            basis.push(Var::W(j));
            target[j] = fill;
        }
    }
    for i in 0..rows {
        if active[i] {
            basis.push(Var::Z(n + i));
            target[n + i] = fill;
        } else {
            // Dependent tight rows get a tiny slack; the relaxation of K
            // this implies is of the same order.
            basis.push(Var::W(n + i));
            target[n + i] = slack[i].max(MIN_SLACK * (1.0 + h[i].abs()));
        }
    }
    Crash { basis, target }
}

/// Covering vector `d = B·target − r`, so the path passes through `z₀ = 1` at
/// the point with basic values `target`.
fn covering_vector(lcp: &LcpInstance, crash: &Crash) -> DVector<f64> {
    let mut d = -lcp.r.clone();
    for (pos, &v) in crash.basis.iter().enumerate() {
        let val = crash.target[pos];
        match v {
            Var::W(i) => d[i] += val,
            Var::Z(j) => d.axpy(-val, &lcp.t.column(j), 1.0),
            Var::Z0 => unreachable!(),
        }
    }
    d
}

/// Complementary basis at the vertex `v = argmin cᵀx` over `K`, for the
/// covering vector `(c, 0)`. For large `z₀` the LCP is solved by `v` with
/// multipliers growing linearly in `z₀`; that branch is the only unbounded
/// one, so from a nondegenerate vertex the path ends at a solution whenever
/// `K` is full-dimensional. `None` when the vertex is degenerate.
fn vertex_start(avi: &AviProblem, g: &DMatrix<f64>, h: &DVector<f64>, c: &DVector<f64>) -> Option<(Vec<Var>, DVector<f64>)> {
    let k = avi.polytope();
    let n = k.dim();
    let lp = LinearProgram::new(c.clone())
        .with_inequalities(k.a().clone(), k.b().clone())
        .with_bounds(k.lower().clone(), k.upper().clone());
    let v = solve_lp(&lp).ok()?.x;
    let y = &v - k.lower();
    let slack = h - g * &y;
    let tight = |val: f64, scale: f64| val <= VERTEX_ACTIVE_TOL * (1.0 + scale.abs());
    let mut basis = Vec::with_capacity(n + g.nrows());
    let mut active = 0;
    for j in 0..n {
        if tight(y[j], k.lower()[j]) {
            basis.push(Var::W(j));
            active += 1;
        } else {
            basis.push(Var::Z(j));
        }
    }
    for i in 0..g.nrows() {
        if tight(slack[i], h[i]) {
            basis.push(Var::Z(n + i));
            active += 1;
        } else {
            basis.push(Var::W(n + i));
        }
    }
    if active != n {
        return None;
    }
    let mut d = DVector::zeros(n + g.nrows());
    d.rows_mut(0, n).copy_from(c);
    Some((basis, d))
}

/// `F(x̂) + σ·noise` at the projection `x̂` of `x0` onto the bounds. A
/// solution `x*` of the AVI also solves it with `q + z₀F(x*)` for every
/// `z₀ ≥ 0`, so when `x̂` is close to a vertex solution the path from the
/// minimizing vertex is short. The small perturbation makes that minimizer
/// unique.
fn informed_objective(avi: &AviProblem, x0: &DVector<f64>, noise: &DVector<f64>) -> DVector<f64> {
    let k = avi.polytope();
    let xh = DVector::from_fn(x0.len(), |j, _| x0[j].clamp(k.lower()[j], k.upper()[j]));
    let f = avi.affine_map(&xh);
    let sigma = INFORMED_NOISE * (f.amax() + f64::MIN_POSITIVE);
    f + noise * sigma
}

/// Lemke path from the vertex minimizing the informed objective at `x0`.
fn informed_vertex_path(
    avi: &AviProblem,
    lcp: &LcpInstance,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    x0: &DVector<f64>,
    opts: &AviSolveOptions,
) -> std::result::Result<(DVector<f64>, SolveStats), PathFailure> {
    let n = avi.dim();
    let mut rng = rng_from_seed(derive_seed(0xA70, &[n as u64, g.nrows() as u64]));
    let noise = DVector::from_fn(n, |_, _| standard_normal(&mut rng));
    let c = informed_objective(avi, x0, &noise);
    let (basis, d) = vertex_start(avi, g, h, &c).ok_or(PathFailure::BadStart)?;
    run_path(&lcp.t, &lcp.r, &d, basis, Direction::Down, opts.max_pivots)
}

/// Newton homotopy from the crash point: follow the path downward in `z₀`,
/// and if that end is the ray, the other end must reach a solution.
fn crash_homotopy(
    lcp: &LcpInstance,
    d: &DVector<f64>,
    crash: &Crash,
    opts: &AviSolveOptions,
    total: &mut SolveStats,
) -> std::result::Result<(DVector<f64>, SolveStats), PathFailure> {
    match run_path(&lcp.t, &lcp.r, d, crash.basis.clone(), Direction::Down, opts.max_pivots) {
        Err(PathFailure::Ray(s)) => {
            total.absorb(&s);
            run_path(&lcp.t, &lcp.r, d, crash.basis.clone(), Direction::Up, opts.max_pivots)
        }
        other => other,
    }
}

fn path_error(f: &PathFailure, total: &SolveStats) -> Error {
    let status = match f {
        PathFailure::IterationLimit(_) => SolveStatus::IterationLimit,
        _ => SolveStatus::RayTermination,
    };
    Error::SolverFailure {
        status,
        pivots: total.pivot_count,
    }
}

/// Solve starting from `x0`.
///
/// The crash basis at `x0` is tried first and costs nothing when `x0`
/// already solves the AVI. Otherwise the path starts at the vertex
/// minimizing `F(x̂)` plus a small perturbation, then falls back to the crash
/// homotopy and finally to vertices of random objectives. Pivot counts
/// include every failed attempt.
pub fn solve_avi_warm(avi: &AviProblem, x0: &DVector<f64>, opts: &AviSolveOptions) -> Result<AviSolution> {
    check_len("initial point", avi.dim(), x0.len())?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::ParameterOutOfRange("initial point must be finite".into()));
    }
    let (lcp, embedding) = avi_to_lcp(avi);
    let (g, h) = constraint_rows(avi);
    let mut total = SolveStats::new();

    let crash = crash_from_point(avi, &g, &h, x0);
    let d = covering_vector(&lcp, &crash);
    // Free when the crash basis already solves the LCP.
    let mut attempt = run_path(&lcp.t, &lcp.r, &d, crash.basis.clone(), Direction::Down, 0);
    if let Err(f) = &attempt {
        if let Some(s) = f.stats() {
            total.absorb(&s);
        }
        attempt = informed_vertex_path(avi, &lcp, &g, &h, x0, opts);
    }
    if let Err(f) = &attempt {
        if let Some(s) = f.stats() {
            total.absorb(&s);
        }
        total.restarts += 1;
        attempt = crash_homotopy(&lcp, &d, &crash, opts, &mut total);
    }
    if let Err(f) = &attempt {
        match f {
            PathFailure::BadStart => total.crash_fallback = true,
            PathFailure::Ray(s)
            | PathFailure::Loop(s)
            | PathFailure::IterationLimit(s)
            | PathFailure::Numerical(s) => total.absorb(s),
        }
        total.restarts += 1;
        let (n, m) = (embedding.n as u64, embedding.m as u64);
        // A random objective has a unique nondegenerate minimizer almost
        // surely; retry a few draws in case of a tie.
        for draw in 0..VERTEX_DRAWS {
            let mut rng = rng_from_seed(derive_seed(0xA71, &[n, m, draw]));
            let c = DVector::from_fn(embedding.n, |_, _| standard_normal(&mut rng));
            let Some((basis, d)) = vertex_start(avi, &g, &h, &c) else {
                continue;
            };
            attempt = run_path(&lcp.t, &lcp.r, &d, basis, Direction::Down, opts.max_pivots);
            if !matches!(attempt, Err(PathFailure::BadStart)) {
                break;
            }
        }
    }
    match attempt {
        Ok((z, s)) => {
            total.absorb(&s);
            total.status = SolveStatus::Solved;
            Ok(AviSolution {
                x: embedding.recover_x(&z),
                stats: total,
            })
        }
        Err(f) => {
            if let Some(s) = f.stats() {
                total.absorb(&s);
            }
            Err(path_error(&f, &total))
        }
    }
}

/// Cold solve: a warm start from the box center, or from some feasible point
/// when the center violates the general rows.
pub fn solve_avi(avi: &AviProblem, opts: &AviSolveOptions) -> Result<AviSolution> {
    let x0 = avi.polytope().feasible_point()?;
    solve_avi_warm(avi, &x0, opts)
}
