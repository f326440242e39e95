//! Convex QPs `min ½xᵀHx + gᵀx` over a polytope, solved as the AVI of their
//! optimality conditions.

use nalgebra::{DMatrix, DVector};

use super::avi_lcp::{solve_avi, AviSolveOptions};
use super::SolveStats;
use crate::avi::AviProblem;
use crate::error::{check_len, Error, Result};
use crate::polytope::Polytope;

const SYMMETRY_TOL: f64 = 1e-8;

/// Minimizer of `½xᵀHx + gᵀx` over `k`; `H` must be symmetric PSD within 1e−8.
pub fn solve_convex_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    k: &Polytope,
) -> Result<(DVector<f64>, SolveStats)> {
    let n = k.dim();
    check_len("H rows", n, h.nrows())?;
    check_len("H columns", n, h.ncols())?;
    check_len("g", n, g.len())?;
    let scale = 1.0 + h.amax();
    if (h - h.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::NotPositiveSemidefinite);
    }
    let shifted = h + DMatrix::identity(n, n) * (SYMMETRY_TOL * scale);
    if n > 0 && shifted.cholesky().is_none() {
        return Err(Error::NotPositiveSemidefinite);
    }
    let avi = AviProblem::new(h.clone(), g.clone(), k.clone())?;
    let sol = solve_avi(&avi, &AviSolveOptions::default())?;
    Ok((sol.x, sol.stats))
}
