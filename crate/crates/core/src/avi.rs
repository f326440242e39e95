//! Affine variational inequalities `AVI(K, M, q)`: find `x ∈ K` with
//! `(y − x)ᵀ(Mx + q) ≥ 0` for all `y ∈ K`. No monotonicity is assumed.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::spectral_norm;
use crate::polytope::Polytope;

/// Norms below this are treated as zero by the angle metric.
const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AviProblem {
    m: DMatrix<f64>,
    q: DVector<f64>,
    k: Polytope,
}

impl AviProblem {
    pub fn new(m: DMatrix<f64>, q: DVector<f64>, k: Polytope) -> Result<Self> {
        let n = k.dim();
        check_len("M rows", n, m.nrows())?;
        check_len("M columns", n, m.ncols())?;
        check_len("q", n, q.len())?;
        if m.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::ParameterOutOfRange("M and q must be finite".into()));
        }
        Ok(Self { m, q, k })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn polytope(&self) -> &Polytope {
        &self.k
    }

    /// The affine map `F(x) = Mx + q`.
    pub fn affine_map(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.m * x + &self.q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub natural_map_residual: f64,
    pub angle_deg: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub difference_norm: Option<f64>,
}

/// `x − Π_K(x − (Mx + q))`; zero exactly at solutions.
pub fn natural_map(avi: &AviProblem, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("point", avi.dim(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::ParameterOutOfRange("point must be finite".into()));
    }
    let step = x - avi.affine_map(x);
    Ok(x - avi.polytope().euclidean_project(&step)?)
}

/// `‖natural_map(x)‖ / (‖x‖ + 1)`.
pub fn residual_metric(avi: &AviProblem, x: &DVector<f64>) -> Result<f64> {
    Ok(natural_map(avi, x)?.norm() / (x.norm() + 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleMetric {
    pub angle_deg: f64,
    pub beta: f64,
    pub y_star: DVector<f64>,
}

/// Largest angle between `q + Mx` and a feasible direction `y − x`.
///
/// Reports 90° when `‖q + Mx‖` or `‖y* − x‖` is below 1e−12.
pub fn angle_metric(avi: &AviProblem, x: &DVector<f64>) -> Result<AngleMetric> {
    check_len("point", avi.dim(), x.len())?;
    let g = avi.affine_map(x);
    let (support, y_star) = avi.polytope().support_min(&g)?;
    let beta = support - x.dot(&g);
    let gn = g.norm();
    let dn = (&y_star - x).norm();
    let angle_deg = if gn <= DEGENERATE_NORM || dn <= DEGENERATE_NORM {
        90.0
    } else {
        (beta / (dn * gn)).clamp(-1.0, 1.0).acos().to_degrees()
    };
    Ok(AngleMetric {
        angle_deg,
        beta,
        y_star,
    })
}

/// `‖x − x̄‖ / (‖x̄‖ + 1)`.
pub fn difference_norm(candidate: &DVector<f64>, reference: &DVector<f64>) -> Result<f64> {
    check_len("reference", candidate.len(), reference.len())?;
    Ok((candidate - reference).norm() / (reference.norm() + 1.0))
}

/// All three quality metrics at `x`.
pub fn quality_report(
    avi: &AviProblem,
    x: &DVector<f64>,
    reference: Option<&DVector<f64>>,
) -> Result<QualityReport> {
    let angle = angle_metric(avi, x)?;
    Ok(QualityReport {
        natural_map_residual: residual_metric(avi, x)?,
        angle_deg: angle.angle_deg,
        beta: angle.beta,
        difference_norm: reference.map(|r| difference_norm(x, r)).transpose()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexVerdict {
    pub is_solution: bool,
    /// `min (x_e − x)ᵀ(q + Mx)` over the vertices `x_e` of `K`.
    pub worst_violation: f64,
    pub worst_vertex: DVector<f64>,
}

/// Finite solution test: `x ∈ K` solves the AVI iff `(x_e − x)ᵀ(q + Mx) ≥ 0`
/// at every vertex `x_e`.
pub fn verify_by_vertices(avi: &AviProblem, x: &DVector<f64>, tol: f64) -> Result<VertexVerdict> {
    check_len("point", avi.dim(), x.len())?;
    let vs = avi
        .polytope()
        .enumerate_vertices(crate::polytope::VERTEX_ENUM_MAX_DIM)?;
    let g = avi.affine_map(x);
    let mut worst = f64::INFINITY;
    let mut worst_vertex = x.clone();
    for v in &vs.vertices {
        let val = (v - x).dot(&g);
        if val < worst {
            worst = val;
            worst_vertex = v.clone();
        }
    }
    let inside = avi.polytope().contains(x, tol)?;
    Ok(VertexVerdict {
        is_solution: inside && worst >= -tol,
        worst_violation: worst,
        worst_vertex,
    })
}

fn check_bound_params(eps: f64, delta: f64, ln_eta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("eps = {eps} not in (0, 1)")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::ParameterOutOfRange(format!("delta = {delta} not in (0, 1]")));
    }
    if !(ln_eta > 0.0 && ln_eta.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!("ln eta = {ln_eta} must be positive")));
    }
    Ok(())
}

/// `2 ln(4η/δ)`.
fn log_factor(delta: f64, ln_eta: f64) -> f64 {
    2.0 * ((4.0f64).ln() + ln_eta - delta.ln())
}

/// Lower bound `ε̂ ≤ 0` on `(y − x#)ᵀ(q + Mx#)` over `K`, with `D` and `B` from
/// [`Polytope::best_diameter_and_radius`].
pub fn epsilon_hat(avi: &AviProblem, eps: f64, delta: f64, ln_eta: f64) -> Result<f64> {
    check_bound_params(eps, delta, ln_eta)?;
    let (d, b) = avi.polytope().best_diameter_and_radius();
    Ok(epsilon_hat_with(
        spectral_norm(avi.m()),
        avi.q().norm(),
        d,
        b,
        avi.dim(),
        eps,
        delta,
        ln_eta,
    ))
}

/// The bound from its scalar ingredients `‖M‖, ‖q‖, D, B`.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_hat_with(
    m_norm: f64,
    q_norm: f64,
    diameter: f64,
    radius: f64,
    n: usize,
    eps: f64,
    delta: f64,
    ln_eta: f64,
) -> f64 {
    let rate = eps * eps / 2.0 - eps.powi(3) / 3.0;
    let first = rate * n as f64 / log_factor(delta, ln_eta) * m_norm * radius;
    -first - eps * diameter * q_norm - eps * diameter * m_norm * radius
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerDimension {
    pub k: usize,
    /// The bound before clamping to `[1, n]`.
    pub unclamped: f64,
    /// True when the bound exceeded `n` and `k = n` was returned.
    pub clamped: bool,
}

/// Smallest `k ≥ 2 ln(4η/δ) / (ε²/2 − ε³/3)`, clamped to `[1, n]`.
///
/// Only `4η/δ > 1` is required of `η`, so `ln η` may be negative here.
pub fn min_lower_dimension(ln_eta: f64, eps: f64, delta: f64, n: usize) -> Result<LowerDimension> {
    check_bound_params(eps, delta, 1.0)?;
    if !ln_eta.is_finite() || log_factor(delta, ln_eta) <= 0.0 {
        return Err(Error::ParameterOutOfRange(format!("need 4η/δ > 1, got ln η = {ln_eta}")));
    }
    if n == 0 {
        return Err(Error::InvalidDimensions("n must be positive".into()));
    }
    let rate = eps * eps / 2.0 - eps.powi(3) / 3.0;
    let unclamped = log_factor(delta, ln_eta) / rate;
    // Guard against ceil(156.0000000001) from roundoff in the logarithms.
    let raw = (unclamped - 1e-9).ceil().max(1.0);
    let clamped = raw > n as f64;
    let k = if clamped { n } else { raw as usize };
    Ok(LowerDimension {
        k,
        unclamped,
        clamped,
    })
}
