//! Uniformly random orthonormal projections and empirical JL checks.
//!
//! A projection is built in two steps: fill an `n × k` matrix with i.i.d.
//! `N(0, 1/k)` entries (column-major order), then orthonormalize its columns.
//! Vectors are mapped by `f(u) = √(n/k) Rᵀu`, which keeps `E‖f(u)‖² = ‖u‖²`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::rng::{derive_seed, rng_from_seed, standard_normal};

const RANK_TOL: f64 = 1e-12;

/// An `n × k` matrix with orthonormal columns and the `√(n/k)` scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    r: DMatrix<f64>,
    scale: f64,
    seed: Option<u64>,
}

impl ProjectionOperator {
    /// Sample a uniformly random orthonormal projection from `seed`.
    pub fn sample(n: usize, k: usize, seed: u64) -> Result<Self> {
        let x = sample_gaussian_matrix(n, k, seed)?;
        let mut op = orthonormalize(&x)?;
        op.seed = Some(seed);
        Ok(op)
    }

    pub fn n(&self) -> usize {
        self.r.nrows()
    }

    pub fn k(&self) -> usize {
        self.r.ncols()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// The `k × n` map `√(n/k) Rᵀ`.
    pub fn scaled_transpose(&self) -> DMatrix<f64> {
        self.r.transpose() * self.scale
    }

    /// `max |RᵀR − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.r.tr_mul(&self.r);
        let k = self.k();
        (g - DMatrix::<f64>::identity(k, k)).amax()
    }
}

fn scale_for(n: usize, k: usize) -> f64 {
    (n as f64 / k as f64).sqrt()
}

/// Draw an `n × k` matrix with i.i.d. `N(0, 1/k)` entries, filled column by
/// column.
pub fn sample_gaussian_matrix(n: usize, k: usize, seed: u64) -> Result<DMatrix<f64>> {
    if k < 1 || k > n {
        return Err(Error::InvalidDimensions(format!(
            "target dimension k={k} must satisfy 1 <= k <= n={n}"
        )));
    }
    let std = 1.0 / (k as f64).sqrt();
    let mut rng = rng_from_seed(seed);
    let mut x = DMatrix::zeros(n, k);
    for j in 0..k {
        for i in 0..n {
            x[(i, j)] = std * standard_normal(&mut rng);
        }
    }
    Ok(x)
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
pub fn orthonormalize(x: &DMatrix<f64>) -> Result<ProjectionOperator> {
    let (n, k) = x.shape();
    if k < 1 || k > n {
        return Err(Error::InvalidDimensions(format!(
            "cannot orthonormalize {k} columns in dimension {n}"
        )));
    }
    let mut q = x.clone();
    // Column-major storage: column j is the slice [j·n, (j+1)·n).
    let data = q.as_mut_slice();
    for j in 0..k {
        let (done, rest) = data.split_at_mut(j * n);
        let col = &mut rest[..n];
        let original = norm(col);
        for _pass in 0..2 {
            for qi in done.chunks_exact(n) {
                let proj = dot(qi, col);
                for (c, &e) in col.iter_mut().zip(qi) {
                    *c -= proj * e;
                }
            }
        }
        let len = norm(col);
        if len < RANK_TOL * original.max(1.0) {
            return Err(Error::RankDeficient { column: j, norm: len });
        }
        col.iter_mut().for_each(|c| *c /= len);
    }
    Ok(ProjectionOperator {
        r: q,
        scale: scale_for(n, k),
        seed: None,
    })
}

/// Four interleaved partial sums, so the loop vectorizes; the summation
/// order is fixed, which keeps results bit-reproducible.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `√(n/k) Rᵀu`.
pub fn project_vector(p: &ProjectionOperator, u: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("projected vector", p.n(), u.len())?;
    Ok(p.r.tr_mul(u) * p.scale)
}

/// Column-wise [`project_vector`].
pub fn project_matrix(p: &ProjectionOperator, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_len("projected matrix rows", p.n(), z.nrows())?;
    Ok(p.r.tr_mul(z) * p.scale)
}

/// `ε²/2 − ε³/3`, the exponent rate shared by the concentration bounds.
pub fn jl_rate(eps: f64) -> f64 {
    eps * eps / 2.0 - eps.powi(3) / 3.0
}

/// Lower bound on `P((1−ε)‖u‖² ≤ ‖f(u)‖² ≤ (1+ε)‖u‖²)`.
pub fn norm_preservation_floor(eps: f64, k: usize) -> f64 {
    1.0 - 2.0 * (-jl_rate(eps) * k as f64 / 2.0).exp()
}

/// Lower bound on `P(|uᵀv − f(u)ᵀf(v)| ≤ ε‖u‖‖v‖)` for `pairs` simultaneous
/// inner products (one pair gives the single-product bound).
pub fn inner_product_floor(eps: f64, k: usize, pairs: usize) -> f64 {
    1.0 - 4.0 * pairs as f64 * (-jl_rate(eps) * k as f64 / 2.0).exp()
}

/// Three-sigma binomial sampling margin for a success probability `p`.
pub fn binomial_margin(p: f64, trials: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Outcome of an empirical concentration experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Concentration {
    pub trials: usize,
    /// Fraction of trials inside the tolerance band.
    pub fraction: f64,
    /// Theoretical lower bound on that fraction.
    pub floor: f64,
    /// Mean of the tracked statistic: `‖f(u)‖²` for norm checks, the first
    /// pair's `f(u)ᵀf(v)` for inner-product checks.
    pub mean_statistic: f64,
}

fn validate_trials(eps: f64, trials: usize) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("eps={eps} not in (0,1)")));
    }
    if trials < 1 {
        return Err(Error::ParameterOutOfRange("trials must be >= 1".into()));
    }
    Ok(())
}

/// Run `trials` independent projections; trial `t` is seeded with
/// `derive_seed(seed, [t])`.
fn per_trial<T: Send>(
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
    f: impl Fn(&ProjectionOperator) -> T + Sync,
) -> Result<Vec<T>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let p = ProjectionOperator::sample(n, k, derive_seed(seed, &[t as u64]))?;
            Ok(f(&p))
        })
        .collect()
}

/// Empirical norm preservation of `u = e₁` over `trials` random projections.
pub fn jl_norm_concentration(
    n: usize,
    k: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<Concentration> {
    validate_trials(eps, trials)?;
    if k < 1 || k > n {
        return Err(Error::InvalidDimensions(format!("k={k}, n={n}")));
    }
    let sq = per_trial(n, k, trials, seed, |p| {
        // f(e₁) = √(n/k)·(first row of R).
        p.r.row(0).norm_squared() * p.scale * p.scale
    })?;
    let inside = sq
        .iter()
        .filter(|&&s| (1.0 - eps..=1.0 + eps).contains(&s))
        .count();
    Ok(Concentration {
        trials,
        fraction: inside as f64 / trials as f64,
        floor: norm_preservation_floor(eps, k),
        mean_statistic: sq.iter().sum::<f64>() / trials as f64,
    })
}

/// Empirical preservation of a single inner product `uᵀv`.
pub fn jl_inner_product_check(
    u: &DVector<f64>,
    v: &DVector<f64>,
    k: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<Concentration> {
    check_len("inner product pair", u.len(), v.len())?;
    jl_simultaneous_check(&[(u.clone(), v.clone())], k, eps, trials, seed)
}

/// Empirical probability that all inner products `uᵢᵀvᵢ` are preserved within
/// `ε‖uᵢ‖‖vᵢ‖` simultaneously.
pub fn jl_simultaneous_check(
    pairs: &[(DVector<f64>, DVector<f64>)],
    k: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<Concentration> {
    validate_trials(eps, trials)?;
    let n = pairs
        .first()
        .map(|(u, _)| u.len())
        .ok_or_else(|| Error::ParameterOutOfRange("no vector pairs".into()))?;
    for (u, v) in pairs {
        check_len("pair u", n, u.len())?;
        check_len("pair v", n, v.len())?;
    }
    if k < 1 || k > n {
        return Err(Error::InvalidDimensions(format!("k={k}, n={n}")));
    }
    let outcomes = per_trial(n, k, trials, seed, |p| {
        let mut all_ok = true;
        let mut first = f64::NAN;
        for (i, (u, v)) in pairs.iter().enumerate() {
            let fu = p.r.tr_mul(u) * p.scale;
            let fv = p.r.tr_mul(v) * p.scale;
            let prod = fu.dot(&fv);
            if i == 0 {
                first = prod;
            }
            all_ok &= (u.dot(v) - prod).abs() <= eps * u.norm() * v.norm();
        }
        (all_ok, first)
    })?;
    let inside = outcomes.iter().filter(|o| o.0).count();
    Ok(Concentration {
        trials,
        fraction: inside as f64 / trials as f64,
        floor: inner_product_floor(eps, k, pairs.len()),
        mean_statistic: outcomes.iter().map(|o| o.1).sum::<f64>() / trials as f64,
    })
}
