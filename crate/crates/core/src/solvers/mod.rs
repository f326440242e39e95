//! Finite-termination pivoting solvers: Lemke's method for LCPs and AVIs,
//! a bounded two-phase simplex for LPs, convex QPs via their AVI form, and
//! ℓ1 recovery.
//!
//! Tolerances used throughout: feasibility 1e−8, complementarity 1e−7
//! (scaled by `1 + ‖r‖`), zero pivot 1e−11 (relative).

mod avi_lcp;
mod l1;
mod lemke;
mod qp;
mod simplex;

use serde::Serialize;

pub use avi_lcp::{avi_to_lcp, solve_avi, solve_avi_warm, AviSolveOptions, AviSolution, LcpEmbedding};
pub use l1::{l1_recover, L1Recovery};
pub use lemke::{lemke_solve, LcpInstance, LcpSolution};
pub use qp::solve_convex_qp;
pub use simplex::{solve_lp, LinearProgram, LpSolution};

pub const FEAS_TOL: f64 = 1e-8;
pub const COMPL_TOL: f64 = 1e-7;

/// Refactorize the basis inverse after this many pivots.
pub const REFACTOR_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Solved,
    RayTermination,
    IterationLimit,
    Infeasible,
    Unbounded,
}

/// Work counters for a solve. `pivot_count` plays the role of a pivoting
/// solver's minor iterations and `refactorization_count` of its major ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub pivot_count: usize,
    pub refactorization_count: usize,
    pub status: SolveStatus,
    /// The crash basis built from the initial point was unusable and the
    /// solve restarted from the trivial basis.
    pub crash_fallback: bool,
    /// Number of randomized restarts after ray termination.
    pub restarts: usize,
}

impl SolveStats {
    pub(crate) fn new() -> Self {
        Self {
            pivot_count: 0,
            refactorization_count: 0,
            status: SolveStatus::Solved,
            crash_fallback: false,
            restarts: 0,
        }
    }

    pub(crate) fn absorb(&mut self, other: &SolveStats) {
        self.pivot_count += other.pivot_count;
        self.refactorization_count += other.refactorization_count;
    }
}
