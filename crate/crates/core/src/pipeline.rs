//! The reduction pipeline: project, solve the reduced AVI, lift back by ℓ1
//! minimization and project onto `K`.
//!
//! With `S = √(n/k) Rᵀ` the reduced problem is `AVI(K̃, M̃, q̃)` where
//! `K̃ = S K`, `M̃ = RᵀMR` and `q̃ = √(n/k) Rᵀq`. `K̃` is never formed as a
//! polytope; the augmented variable `v = (x̃, x)` with `x̃ = S x, x ∈ K`
//! describes it instead.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::avi::{epsilon_hat, min_lower_dimension, verify_by_vertices, AviProblem, LowerDimension};
use crate::error::{check_len, Error, Result};
use crate::polytope::{log_vertex_bound, Polytope};
use crate::randproj::ProjectionOperator;
use crate::solvers::{
    l1_recover, solve_avi, solve_avi_warm, AviSolveOptions, SolveStats,
};

/// The augmented reduced problem in `v = (x̃, x) ∈ ℝ^{k+n}`:
/// `C v = 0`, `D v ≤ b`, box bounds on both blocks, and the affine map
/// `M̂ v + q̂` acting only on `x̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub n: usize,
    pub k: usize,
    pub m_tilde: DMatrix<f64>,
    pub q_tilde: DVector<f64>,
    /// `S = √(n/k) Rᵀ`, `k × n`.
    pub s: DMatrix<f64>,
    /// `[[M̃, 0], [0, 0]]`.
    pub m_hat: DMatrix<f64>,
    /// `(q̃, 0)`.
    pub q_hat: DVector<f64>,
    /// `[I | −S]`.
    pub c: DMatrix<f64>,
    /// `[0 | A]`.
    pub d: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Interval enclosure of `S [L, U]`.
    pub x_tilde_lower: DVector<f64>,
    pub x_tilde_upper: DVector<f64>,
    /// The original `K`, i.e. the `x` block constraints.
    pub polytope: Polytope,
}

impl ReducedProblem {
    /// Positions of `x̃` inside `v`.
    pub fn x_tilde_range(&self) -> std::ops::Range<usize> {
        0..self.k
    }

    /// Positions of `x` inside `v`.
    pub fn x_range(&self) -> std::ops::Range<usize> {
        self.k..self.k + self.n
    }

    /// Whether `v` satisfies every block of the augmented system within `tol`.
    pub fn is_feasible(&self, v: &DVector<f64>, tol: f64) -> Result<bool> {
        check_len("augmented point", self.k + self.n, v.len())?;
        let xt = v.rows(0, self.k);
        let x = v.rows(self.k, self.n).into_owned();
        let eq_ok = (&self.c * v).amax() <= tol;
        let box_ok = (0..self.k)
            .all(|i| xt[i] >= self.x_tilde_lower[i] - tol && xt[i] <= self.x_tilde_upper[i] + tol);
        Ok(eq_ok && box_ok && self.polytope.contains(&x, tol)?)
    }

    /// The reduced AVI pulled back to `x`: `AVI(K, SᵀM̃S, Sᵀq̃)`. If `x` solves
    /// it then `S x` solves `AVI(K̃, M̃, q̃)`.
    pub fn eliminated_avi(&self) -> Result<AviProblem> {
        let st = self.s.transpose();
        let m = &st * &self.m_tilde * &self.s;
        let q = &st * &self.q_tilde;
        AviProblem::new(m, q, self.polytope.clone())
    }
}

/// Assemble the reduced problem for the projection `p`.
pub fn build_reduced(avi: &AviProblem, p: &ProjectionOperator) -> Result<ReducedProblem> {
    let (n, k) = (avi.dim(), p.k());
    check_len("projection dimension", n, p.n())?;
    let r = p.matrix();
    let s = p.scaled_transpose();
    let m_tilde = r.transpose() * avi.m() * r;
    let q_tilde = &s * avi.q();

    let mut m_hat = DMatrix::zeros(k + n, k + n);
    m_hat.view_mut((0, 0), (k, k)).copy_from(&m_tilde);
    let mut q_hat = DVector::zeros(k + n);
    q_hat.rows_mut(0, k).copy_from(&q_tilde);
    let mut c = DMatrix::zeros(k, k + n);
    c.view_mut((0, 0), (k, k)).fill_with_identity();
    c.view_mut((0, k), (k, n)).copy_from(&(-&s));
    let kp = avi.polytope();
    let rows = kp.num_rows();
    let mut d = DMatrix::zeros(rows, k + n);
    d.view_mut((0, k), (rows, n)).copy_from(kp.a());

    let (lo, hi) = (kp.lower(), kp.upper());
    let mut x_tilde_lower = DVector::zeros(k);
    let mut x_tilde_upper = DVector::zeros(k);
    for i in 0..k {
        for j in 0..n {
            let (a, b) = (s[(i, j)] * lo[j], s[(i, j)] * hi[j]);
            x_tilde_lower[i] += a.min(b);
            x_tilde_upper[i] += a.max(b);
        }
    }
    Ok(ReducedProblem {
        n,
        k,
        m_tilde,
        q_tilde,
        s,
        m_hat,
        q_hat,
        c,
        d,
        b: kp.b().clone(),
        x_tilde_lower,
        x_tilde_upper,
        polytope: kp.clone(),
    })
}

/// Solve the reduced AVI; returns its solution `x̃`.
pub fn solve_reduced(rp: &ReducedProblem, opts: &AviSolveOptions) -> Result<(DVector<f64>, SolveStats)> {
    let sol = solve_avi(&rp.eliminated_avi()?, opts)?;
    Ok((&rp.s * sol.x, sol.stats))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmAOptions {
    pub eps: f64,
    pub delta: f64,
    /// Use this `k` instead of the dimension rule.
    pub k_override: Option<usize>,
    pub seed: u64,
    /// Replaces the default vertex-count bound in the dimension rule and in ε̂.
    pub ln_eta: Option<f64>,
    pub solver: AviSolveOptions,
}

impl Default for AlgorithmAOptions {
    fn default() -> Self {
        Self {
            eps: 0.5,
            delta: 0.1,
            k_override: None,
            seed: 0,
            ln_eta: None,
            solver: AviSolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Parameters,
    Projection,
    Reduction,
    ReducedSolve,
    Recovery,
    ProjectOntoK,
    Bound,
    ExactSolve,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub reduce: f64,
    pub solve: f64,
    pub recover: f64,
    pub project: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.reduce + self.solve + self.recover + self.project
    }
}

/// Whatever the pipeline computed before a failure.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialResult {
    pub k: Option<usize>,
    pub x_tilde: Option<DVector<f64>>,
    pub x_star: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("stage {stage:?} failed (seed {seed}): {source}")]
pub struct PipelineError {
    pub stage: Stage,
    pub seed: u64,
    pub source: Error,
    pub partial: Box<PartialResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmAResult {
    pub x_sharp: DVector<f64>,
    pub x_star: DVector<f64>,
    pub x_tilde: DVector<f64>,
    pub k_used: usize,
    /// Outcome of the dimension rule (also computed under an override).
    pub k_rule: LowerDimension,
    pub eps: f64,
    pub delta: f64,
    pub ln_eta: f64,
    pub epsilon_hat: f64,
    pub reduced_stats: SolveStats,
    pub recovery_stats: SolveStats,
    /// `‖S x* − x̃‖`.
    pub recovery_residual: f64,
    pub seed: u64,
    pub timings: StageTimings,
}

fn default_ln_eta(avi: &AviProblem) -> f64 {
    let k = avi.polytope();
    log_vertex_bound(k.dim(), k.total_rows()).max(f64::MIN_POSITIVE)
}

/// The full reduction pipeline; deterministic in `opts.seed`.
pub fn run_algorithm_a(
    avi: &AviProblem,
    opts: &AlgorithmAOptions,
) -> std::result::Result<AlgorithmAResult, PipelineError> {
    let mut partial = PartialResult::default();
    let fail = |stage, source, partial: &PartialResult| PipelineError {
        stage,
        seed: opts.seed,
        source,
        partial: Box::new(partial.clone()),
    };
    let n = avi.dim();
    let ln_eta = opts.ln_eta.unwrap_or_else(|| default_ln_eta(avi));
    let k_rule = min_lower_dimension(ln_eta, opts.eps, opts.delta, n)
        .map_err(|e| fail(Stage::Parameters, e, &partial))?;
    let k = match opts.k_override {
        Some(k) if k == 0 || k > n => {
            let e = Error::InvalidDimensions(format!("k = {k} must lie in [1, {n}]"));
            return Err(fail(Stage::Parameters, e, &partial));
        }
        Some(k) => k,
        None => k_rule.k,
    };
    partial.k = Some(k);
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let p = ProjectionOperator::sample(n, k, opts.seed)
        .map_err(|e| fail(Stage::Projection, e, &partial))?;
    let rp = build_reduced(avi, &p).map_err(|e| fail(Stage::Reduction, e, &partial))?;
    timings.reduce = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let (x_tilde, reduced_stats) =
        solve_reduced(&rp, &opts.solver).map_err(|e| fail(Stage::ReducedSolve, e, &partial))?;
    timings.solve = clock.elapsed().as_secs_f64();
    partial.x_tilde = Some(x_tilde.clone());

    let clock = Instant::now();
    let kp = avi.polytope();
    let bound = kp
        .lower()
        .iter()
        .chain(kp.upper().iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let box_radius = 10.0 * bound.max(1.0);
    let rec = l1_recover(&p, &x_tilde, box_radius).map_err(|e| fail(Stage::Recovery, e, &partial))?;
    timings.recover = clock.elapsed().as_secs_f64();
    partial.x_star = Some(rec.x.clone());

    let clock = Instant::now();
    let x_sharp = kp
        .euclidean_project(&rec.x)
        .map_err(|e| fail(Stage::ProjectOntoK, e, &partial))?;
    timings.project = clock.elapsed().as_secs_f64();

    let eps_hat = epsilon_hat(avi, opts.eps, opts.delta, ln_eta)
        .map_err(|e| fail(Stage::Bound, e, &partial))?;

    Ok(AlgorithmAResult {
        x_sharp,
        x_star: rec.x,
        x_tilde,
        k_used: k,
        k_rule,
        eps: opts.eps,
        delta: opts.delta,
        ln_eta,
        epsilon_hat: eps_hat,
        reduced_stats,
        recovery_stats: rec.stats,
        recovery_residual: rec.residual,
        seed: opts.seed,
        timings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotStart {
    pub result: AlgorithmAResult,
    /// Solution reached from the warm start.
    pub x_exact: DVector<f64>,
    pub warm_stats: SolveStats,
    pub cold_x: DVector<f64>,
    pub cold_stats: SolveStats,
}

/// Run the pipeline, then solve the full AVI both warm-started from `x#`
/// and cold.
pub fn run_exact_hot_start(
    avi: &AviProblem,
    opts: &AlgorithmAOptions,
) -> std::result::Result<HotStart, PipelineError> {
    let result = run_algorithm_a(avi, opts)?;
    let fail = |source, result: &AlgorithmAResult| PipelineError {
        stage: Stage::ExactSolve,
        seed: opts.seed,
        source,
        partial: Box::new(PartialResult {
            k: Some(result.k_used),
            x_tilde: Some(result.x_tilde.clone()),
            x_star: Some(result.x_star.clone()),
        }),
    };
    let warm = solve_avi_warm(avi, &result.x_sharp, &opts.solver).map_err(|e| fail(e, &result))?;
    let cold = solve_avi(avi, &opts.solver).map_err(|e| fail(e, &result))?;
    Ok(HotStart {
        result,
        x_exact: warm.x,
        warm_stats: warm.stats,
        cold_x: cold.x,
        cold_stats: cold.stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    /// `min (x_e − x#)ᵀ(q + Mx#)` over the vertices of `K`.
    pub min_vertex_inner_product: f64,
    pub epsilon_hat: f64,
    pub satisfied: bool,
}

/// Check the worst-case inner product at `x#` against ε̂.
pub fn theorem1_certificate(avi: &AviProblem, result: &AlgorithmAResult) -> Result<Certificate> {
    let verdict = verify_by_vertices(avi, &result.x_sharp, 1e-8)?;
    Ok(Certificate {
        min_vertex_inner_product: verdict.worst_violation,
        epsilon_hat: result.epsilon_hat,
        satisfied: verdict.worst_violation >= result.epsilon_hat - 1e-8,
    })
}
