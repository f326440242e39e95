//! Minimum-ℓ1 preimage under the scaled projection `S = √(n/k) Rᵀ`.

use nalgebra::{DMatrix, DVector};

use super::simplex::{solve_lp, LinearProgram};
use super::SolveStats;
use crate::error::{check_len, Error, Result};
use crate::randproj::ProjectionOperator;

#[derive(Debug, Clone, PartialEq)]
pub struct L1Recovery {
    pub x: DVector<f64>,
    pub stats: SolveStats,
    /// `‖S x − x̃‖`.
    pub residual: f64,
}

/// `argmin ‖x‖₁` subject to `S x = x̃` and `‖x‖∞ ≤ box_radius`, through the
/// split `x = x⁺ − x⁻`.
pub fn l1_recover(p: &ProjectionOperator, x_tilde: &DVector<f64>, box_radius: f64) -> Result<L1Recovery> {
    check_len("reduced point", p.k(), x_tilde.len())?;
    if box_radius.is_nan() || box_radius <= 0.0 {
        return Err(Error::ParameterOutOfRange("box radius must be positive".into()));
    }
    let s = p.scaled_transpose();
    recover_with(&s, x_tilde, box_radius)
}

pub(crate) fn recover_with(s: &DMatrix<f64>, x_tilde: &DVector<f64>, box_radius: f64) -> Result<L1Recovery> {
    let (k, n) = s.shape();
    let mut a = DMatrix::zeros(k, 2 * n);
    a.columns_mut(0, n).copy_from(s);
    a.columns_mut(n, n).copy_from(&(-s));
    let lp = LinearProgram::new(DVector::from_element(2 * n, 1.0))
        .with_equalities(a, x_tilde.clone())
        .with_bounds(DVector::zeros(2 * n), DVector::from_element(2 * n, box_radius));
    let sol = solve_lp(&lp).map_err(|e| match e {
        Error::InfeasibleSet => Error::Internal("l1 recovery LP infeasible".into()),
        other => other,
    })?;
    let x = sol.x.rows(0, n) - sol.x.rows(n, n);
    let residual = (s * &x - x_tilde).norm();
    Ok(L1Recovery {
        x,
        stats: sol.stats,
        residual,
    })
}
