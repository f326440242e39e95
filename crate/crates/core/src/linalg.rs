//! Dense linear algebra shared by the solvers and the bound computations.

use nalgebra::{DMatrix, DVector};

/// Relative threshold under which an LU pivot is treated as zero.
pub const ZERO_PIVOT: f64 = 1e-11;

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 10_000;

fn power_start(n: usize) -> DVector<f64> {
    // Deterministic start with no special alignment to coordinate axes.
    let v = DVector::from_fn(n, |i, _| 1.0 + 1.0 / (i as f64 + 2.0));
    let norm = v.norm();
    v / norm
}

/// Dominant eigenvalue of a symmetric PSD operator given by `apply`.
fn power_iteration(n: usize, apply: impl Fn(&DVector<f64>) -> DVector<f64>) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut v = power_start(n);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = apply(&v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= POWER_TOL * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// ℓ2-induced norm of `m`, by power iteration on `mᵀm`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    let lambda = power_iteration(m.ncols(), |v| m.tr_mul(&(m * v)));
    lambda.max(0.0).sqrt()
}

/// Smallest eigenvalue of a symmetric matrix, via power iteration on the
/// shifted operator `σI − s` with `σ` an upper bound on the spectrum.
pub fn min_eigenvalue_symmetric(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows();
    if n == 0 {
        return 0.0;
    }
    let sigma = s.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
    let top = power_iteration(n, |v| v * sigma - s * v);
    sigma - top
}

/// Solve a square system with partial pivoting, returning `None` when a pivot
/// falls below [`ZERO_PIVOT`] relative to the largest entry.
pub fn solve_square(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let lu = a.clone().lu();
    let u = lu.u();
    if (0..n).any(|i| u[(i, i)].abs() <= ZERO_PIVOT * scale) {
        return None;
    }
    lu.solve(b)
}

/// Explicit dense inverse of a basis matrix, maintained under column
/// replacement by Gauss–Jordan row operations.
#[derive(Debug, Clone)]
pub struct BasisInverse {
    inv: DMatrix<f64>,
}

impl BasisInverse {
    /// Factor `basis` from scratch; `None` if numerically singular.
    pub fn factor(basis: &DMatrix<f64>) -> Option<Self> {
        let n = basis.nrows();
        if n == 0 {
            return Some(Self::identity(0));
        }
        let scale = basis.amax().max(f64::MIN_POSITIVE);
        let lu = basis.clone().lu();
        let u = lu.u();
        if (0..n).any(|i| u[(i, i)].abs() <= ZERO_PIVOT * scale) {
            return None;
        }
        lu.try_inverse().map(|inv| Self { inv })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inv: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.inv.nrows()
    }

    /// `B⁻¹ a`.
    pub fn ftran(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.inv * a
    }

    /// `yᵀ = cᵀ B⁻¹`.
    pub fn btran(&self, c: &DVector<f64>) -> DVector<f64> {
        self.inv.tr_mul(c)
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.inv[(i, j)]
    }

    /// Replace basis column `r` given `alpha = B⁻¹ a_entering`.
    pub fn pivot(&mut self, r: usize, alpha: &DVector<f64>) {
        let n = self.dim();
        let piv = alpha[r];
        for j in 0..n {
            self.inv[(r, j)] /= piv;
        }
        for i in 0..n {
            if i == r {
                continue;
            }
            let f = alpha[i];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                let rj = self.inv[(r, j)];
                self.inv[(i, j)] -= f * rj;
            }
        }
    }
}
