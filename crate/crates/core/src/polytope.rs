//! Polytopes in H-representation `K = {x : Ax ≤ b, lower ≤ x ≤ upper}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::linalg::solve_square;
use crate::solvers::{solve_convex_qp, solve_lp, LinearProgram};

/// Default dimension limit for exhaustive vertex enumeration.
pub const VERTEX_ENUM_MAX_DIM: usize = 8;

/// Absolute tolerance for vertex feasibility and deduplication.
pub const VERTEX_TOL: f64 = 1e-8;

/// Enumeration budget for the exact extents used by the error bound.
pub const EXACT_EXTENTS_MAX_SUBSETS: f64 = 2e5;

/// Compact polytope with finite box bounds.
///
/// Emptiness is not checked at construction beyond `lower ≤ upper`; operations
/// that need a point of `K` report [`Error::InfeasibleSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Polytope {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self> {
        let n = lower.len();
        check_len("upper bounds", n, upper.len())?;
        check_len("constraint columns", n, a.ncols())?;
        check_len("right-hand side", a.nrows(), b.len())?;
        let all_finite = a
            .iter()
            .chain(b.iter())
            .chain(lower.iter())
            .chain(upper.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::ParameterOutOfRange(
                "polytope data must be finite".into(),
            ));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::InfeasibleSet);
        }
        Ok(Self { a, b, lower, upper })
    }

    /// Box `{lower ≤ x ≤ upper}` with no general rows.
    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let n = lower.len();
        Self::new(DMatrix::zeros(0, n), DVector::zeros(0), lower, upper)
    }

    pub fn unit_box(n: usize) -> Self {
        Self::boxed(DVector::zeros(n), DVector::from_element(n, 1.0))
            .expect("unit box is well formed")
    }

    /// Add general rows `a x ≤ b` to an existing polytope.
    pub fn with_rows(self, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        Self::new(a, b, self.lower, self.upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Number of general rows `m` (bound rows excluded).
    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    /// The full inequality system `G x ≤ h`: general rows, then `−x ≤ −lower`,
    /// then `x ≤ upper`.
    pub fn inequality_system(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (m, n) = (self.num_rows(), self.dim());
        let mut g = DMatrix::zeros(m + 2 * n, n);
        let mut h = DVector::zeros(m + 2 * n);
        g.rows_mut(0, m).copy_from(&self.a);
        h.rows_mut(0, m).copy_from(&self.b);
        for j in 0..n {
            g[(m + j, j)] = -1.0;
            h[m + j] = -self.lower[j];
            g[(m + n + j, j)] = 1.0;
            h[m + n + j] = self.upper[j];
        }
        (g, h)
    }

    /// Largest violation `max(Ax − b, lower − x, x − upper, 0)`.
    pub fn max_violation(&self, x: &DVector<f64>) -> Result<f64> {
        check_len("point", self.dim(), x.len())?;
        let rows = (&self.a * x - &self.b).iter().fold(0.0f64, |m, &v| m.max(v));
        let bounds = (0..self.dim()).fold(0.0f64, |m, j| {
            m.max(self.lower[j] - x[j]).max(x[j] - self.upper[j])
        });
        Ok(rows.max(bounds))
    }

    /// `Ax ≤ b + tol` and `lower − tol ≤ x ≤ upper + tol`.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.max_violation(x)? <= tol)
    }

    /// Some point of `K`, or [`Error::InfeasibleSet`].
    pub fn feasible_point(&self) -> Result<DVector<f64>> {
        let c = self.center();
        if self.contains(&c, 0.0)? {
            return Ok(c);
        }
        let lp = LinearProgram::new(DVector::zeros(self.dim()))
            .with_inequalities(self.a.clone(), self.b.clone())
            .with_bounds(self.lower.clone(), self.upper.clone());
        solve_lp(&lp).map(|s| s.x).map_err(|e| match e {
            Error::SolverFailure { .. } | Error::InfeasibleSet => Error::InfeasibleSet,
            other => other,
        })
    }

    /// Euclidean projection `argmin_{z ∈ K} ‖x − z‖²`.
    pub fn euclidean_project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("point", self.dim(), x.len())?;
        if self.num_rows() == 0 {
            // Separable over coordinates.
            return Ok(DVector::from_fn(self.dim(), |j, _| {
                x[j].clamp(self.lower[j], self.upper[j])
            }));
        }
        if self.contains(x, 0.0)? {
            return Ok(x.clone());
        }
        let n = self.dim();
        let (z, _) = solve_convex_qp(&DMatrix::identity(n, n), &(-x), self)?;
        Ok(z)
    }

    /// `min cᵀy` over `K`; returns the optimal value and a vertex minimizer.
    pub fn support_min(&self, c: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_len("objective", self.dim(), c.len())?;
        let lp = LinearProgram::new(c.clone())
            .with_inequalities(self.a.clone(), self.b.clone())
            .with_bounds(self.lower.clone(), self.upper.clone());
        let sol = solve_lp(&lp)?;
        let value = c.dot(&sol.x);
        Ok((value, sol.x))
    }

    /// Exhaustive vertex enumeration over all `n`-subsets of active rows.
    pub fn enumerate_vertices(&self, max_dim: usize) -> Result<VertexSet> {
        let n = self.dim();
        if n > max_dim {
            return Err(Error::DimensionTooLarge { n, max: max_dim });
        }
        let (g, h) = self.inequality_system();
        let rows = g.nrows();
        let mut vertices: Vec<DVector<f64>> = Vec::new();
        if n == 0 {
            return Ok(VertexSet {
                vertices: vec![DVector::zeros(0)],
            });
        }
        let mut subset: Vec<usize> = (0..n).collect();
        loop {
            let sub_g = DMatrix::from_fn(n, n, |i, j| g[(subset[i], j)]);
            let sub_h = DVector::from_fn(n, |i, _| h[subset[i]]);
            if let Some(x) = solve_square(&sub_g, &sub_h) {
                let feasible = (&g * &x - &h).iter().all(|&v| v <= VERTEX_TOL);
                if feasible && !vertices.iter().any(|v| (v - &x).amax() <= VERTEX_TOL) {
                    vertices.push(x);
                }
            }
            if !next_combination(&mut subset, rows) {
                break;
            }
        }
        if vertices.is_empty() {
            return Err(Error::InfeasibleSet);
        }
        Ok(VertexSet { vertices })
    }

    /// Bounding-box upper bounds `(D, B)` on the diameter and on `max ‖x‖`.
    pub fn diameter_and_radius(&self) -> (f64, f64) {
        let d = (&self.upper - &self.lower).norm();
        let b = self
            .lower
            .iter()
            .zip(self.upper.iter())
            .map(|(l, u)| l.abs().max(u.abs()).powi(2))
            .sum::<f64>()
            .sqrt();
        (d, b)
    }

    /// Bounding-box upper bound on `max ‖x‖₁`.
    pub fn l1_radius(&self) -> f64 {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .map(|(l, u)| l.abs().max(u.abs()))
            .sum()
    }

    /// Exact `(D, B, B′)` from the vertex set (all three are maxima of convex
    /// functions, attained at vertices).
    pub fn exact_extents(&self, max_dim: usize) -> Result<Extents> {
        let vs = self.enumerate_vertices(max_dim)?;
        let v = &vs.vertices;
        let mut diameter = 0.0f64;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                diameter = diameter.max((&v[i] - &v[j]).norm());
            }
        }
        Ok(Extents {
            diameter,
            radius: v.iter().map(|x| x.norm()).fold(0.0, f64::max),
            l1_radius: v.iter().map(|x| x.lp_norm(1)).fold(0.0, f64::max),
        })
    }

    /// `(D, B)` used by the error bound: exact when `n ≤` [`VERTEX_ENUM_MAX_DIM`]
    /// and enumeration visits at most [`EXACT_EXTENTS_MAX_SUBSETS`] row
    /// subsets, bounding-box otherwise.
    pub fn best_diameter_and_radius(&self) -> (f64, f64) {
        let subsets = ln_binomial(self.total_rows(), self.dim());
        if self.dim() <= VERTEX_ENUM_MAX_DIM && subsets <= EXACT_EXTENTS_MAX_SUBSETS.ln() {
            if let Ok(e) = self.exact_extents(VERTEX_ENUM_MAX_DIM) {
                return (e.diameter, e.radius);
            }
        }
        self.diameter_and_radius()
    }

    /// Total inequality rows counting both bound rows per coordinate.
    pub fn total_rows(&self) -> usize {
        self.num_rows() + 2 * self.dim()
    }
}

/// Advance `subset` to the next `k`-combination of `0..n` in lexicographic
/// order; false when exhausted.
fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    pub vertices: Vec<DVector<f64>>,
}

impl VertexSet {
    /// η, the number of extreme points.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extents {
    pub diameter: f64,
    pub radius: f64,
    pub l1_radius: f64,
}

/// `ln C(a, b)` by summing logarithms.
pub fn ln_binomial(a: usize, b: usize) -> f64 {
    let b = b.min(a - b.min(a));
    (1..=b)
        .map(|i| ((a - b + i) as f64).ln() - (i as f64).ln())
        .sum()
}

/// Upper bound on `ln η` for a polytope in dimension `n` described by
/// `m_total` inequality rows (general rows plus both bound rows).
///
/// Shifting by the lower bounds turns those rows into sign constraints; one
/// slack per remaining row gives a standard form with `n′ = m_total`
/// variables and `m′ = m_total − n` equalities, and `η ≤ C(n′, m′)`.
pub fn log_vertex_bound(n: usize, m_total: usize) -> f64 {
    let vars = m_total.max(n);
    let eqs = vars - n;
    ln_binomial(vars, eqs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    fn triangle() -> Polytope {
        Polytope::unit_box(2)
            .with_rows(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), v(&[1.0]))
            .unwrap()
    }

    #[test]
    fn contains_with_tolerance() {
        let k = Polytope::unit_box(2);
        assert!(k.contains(&v(&[0.5, 0.5]), 0.0).unwrap());
        assert!(!k.contains(&v(&[1.0000001, 0.0]), 1e-9).unwrap());
        assert!(k.contains(&v(&[1.0000001, 0.0]), 1e-6).unwrap());
        assert!(k.contains(&v(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn contradictory_bounds_are_empty() {
        assert_eq!(
            Polytope::boxed(v(&[1.0]), v(&[0.0])),
            Err(Error::InfeasibleSet)
        );
    }

    #[test]
    fn projection_examples() {
        let k = Polytope::unit_box(2);
        assert_eq!(k.euclidean_project(&v(&[0.3, 0.9])).unwrap(), v(&[0.3, 0.9]));
        assert_eq!(k.euclidean_project(&v(&[2.0, -1.0])).unwrap(), v(&[1.0, 0.0]));

        // Onto the facet x1 + x2 = 1 of the triangle.
        let p = triangle().euclidean_project(&v(&[1.0, 1.0])).unwrap();
        assert!((p - v(&[0.5, 0.5])).amax() < 1e-9);
    }

    #[test]
    fn projection_with_rows_matches_variational_inequality() {
        let k = triangle();
        let x = v(&[2.0, 0.3]);
        let p = k.euclidean_project(&x).unwrap();
        for y in k.enumerate_vertices(8).unwrap().vertices {
            assert!((&y - &p).dot(&(&x - &p)) <= 1e-7 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn support_min_examples() {
        let k = Polytope::unit_box(2);
        let (val, y) = k.support_min(&v(&[1.0, -1.0])).unwrap();
        assert_relative_eq!(val, -1.0);
        assert_eq!(y, v(&[0.0, 1.0]));

        let (val, y) = k.support_min(&v(&[0.0, 0.0])).unwrap();
        assert_eq!(val, 0.0);
        assert!(k.contains(&y, 1e-12).unwrap());

        let (val, y) = triangle().support_min(&v(&[-1.0, -1.0])).unwrap();
        assert_relative_eq!(val, -1.0, epsilon = 1e-12);
        assert_relative_eq!(y[0] + y[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn vertices_of_box_and_triangle() {
        let vs = Polytope::unit_box(2).enumerate_vertices(8).unwrap();
        assert_eq!(vs.len(), 4);
        for corner in [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] {
            assert!(vs.vertices.iter().any(|x| (x - v(&corner)).amax() < 1e-12));
        }
        let vs = triangle().enumerate_vertices(8).unwrap();
        assert_eq!(vs.len(), 3);
        assert!(!vs.vertices.iter().any(|x| (x - v(&[1.0, 1.0])).amax() < 1e-6));
    }

    #[test]
    fn vertices_of_simplex() {
        // x ≥ 0 (via bounds), Σx ≤ 1 and −Σx ≤ −1.
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
        let k = Polytope::new(a, v(&[1.0, -1.0]), DVector::zeros(3), DVector::from_element(3, 5.0))
            .unwrap();
        let vs = k.enumerate_vertices(8).unwrap();
        assert_eq!(vs.len(), 3);
        for j in 0..3 {
            let e = DVector::from_fn(3, |i, _| if i == j { 1.0 } else { 0.0 });
            assert!(vs.vertices.iter().any(|x| (x - &e).amax() < 1e-12));
        }
    }

    #[test]
    fn vertex_enumeration_gates() {
        assert!(matches!(
            Polytope::unit_box(9).enumerate_vertices(8),
            Err(Error::DimensionTooLarge { n: 9, max: 8 })
        ));
        let empty = Polytope::unit_box(2)
            .with_rows(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), v(&[-1.0]))
            .unwrap();
        assert_eq!(empty.enumerate_vertices(8), Err(Error::InfeasibleSet));
        assert_eq!(empty.feasible_point(), Err(Error::InfeasibleSet));
    }

    #[test]
    fn box_extents() {
        let (d, b) = Polytope::unit_box(2).diameter_and_radius();
        assert_relative_eq!(d, 2.0f64.sqrt());
        assert_relative_eq!(b, 2.0f64.sqrt());
        let k = Polytope::boxed(v(&[-1.0]), v(&[1.0])).unwrap();
        assert_eq!(k.diameter_and_radius(), (2.0, 1.0));
        assert_eq!(Polytope::unit_box(2).l1_radius(), 2.0);
        assert_eq!(Polytope::boxed(v(&[-2.0]), v(&[1.0])).unwrap().l1_radius(), 2.0);
    }

    #[test]
    fn bounds_dominate_exact_extents() {
        let k = triangle();
        let e = k.exact_extents(8).unwrap();
        let (d, b) = k.diameter_and_radius();
        assert!(d >= e.diameter && b >= e.radius && k.l1_radius() >= e.l1_radius);
        assert_relative_eq!(e.diameter, 2.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn log_vertex_bound_examples() {
        assert_relative_eq!(log_vertex_bound(2, 4), 6.0f64.ln(), epsilon = 1e-12);
        assert_eq!(log_vertex_bound(0, 5), 0.0);
        assert!(log_vertex_bound(10, 20) >= 10.0 * 2.0f64.ln());
        assert_relative_eq!(ln_binomial(10, 3), 120.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_vertex_bound_monotone() {
        for n in 1..8 {
            for m in 0..6 {
                let base = log_vertex_bound(n, m + 2 * n);
                assert!(log_vertex_bound(n, m + 1 + 2 * n) >= base);
                assert!(log_vertex_bound(n + 1, m + 2 * (n + 1)) >= base);
            }
        }
    }

    #[test]
    fn combinations_are_exhaustive() {
        let mut s = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut s, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
    }
}
