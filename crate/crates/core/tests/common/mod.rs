//! Independent brute-force oracles and random instance corpora shared by
//! the integration tests. Nothing here calls the library's solvers.

#![allow(dead_code)]

use avired::rng::{derive_seed, rng_from_seed, standard_normal, uniform01, SeededRng};
use avired::{AviProblem, Polytope};
use nalgebra::{DMatrix, DVector};

pub fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_vec(x.to_vec())
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Full-pivoting solve that refuses near-singular systems.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Some(DVector::zeros(0));
    }
    let lu = a.clone().full_piv_lu();
    let u = lu.u();
    let big = a.amax().max(1e-300);
    if (0..n).any(|i| u[(i, i)].abs() < 1e-10 * big) {
        return None;
    }
    lu.solve(b)
}

/// Rows `G x ≤ h` of the polytope, built from its public data.
pub fn rows(k: &Polytope) -> (DMatrix<f64>, DVector<f64>) {
    let (n, m) = (k.dim(), k.num_rows());
    let mut g = DMatrix::zeros(m + 2 * n, n);
    let mut h = DVector::zeros(m + 2 * n);
    for i in 0..m {
        g.set_row(i, &k.a().row(i));
        h[i] = k.b()[i];
    }
    for j in 0..n {
        g[(m + j, j)] = 1.0;
        h[m + j] = k.upper()[j];
        g[(m + n + j, j)] = -1.0;
        h[m + n + j] = -k.lower()[j];
    }
    (g, h)
}

/// Vertices of `K` by solving every `n`-subset of rows.
pub fn vertices(k: &Polytope) -> Vec<DVector<f64>> {
    let (g, h) = rows(k);
    let n = k.dim();
    let mut out: Vec<DVector<f64>> = Vec::new();
    for s in subsets(g.nrows(), n) {
        let gs = DMatrix::from_fn(n, n, |i, j| g[(s[i], j)]);
        let hs = DVector::from_fn(n, |i, _| h[s[i]]);
        if let Some(x) = solve_dense(&gs, &hs) {
            if (&g * &x - &h).max() <= 1e-9 && !out.iter().any(|y| (y - &x).amax() < 1e-9) {
                out.push(x);
            }
        }
    }
    out
}

/// `min cᵀx` over `K` by vertex enumeration.
pub fn lp_min_by_vertices(k: &Polytope, c: &DVector<f64>) -> f64 {
    vertices(k).iter().map(|x| c.dot(x)).fold(f64::INFINITY, f64::min)
}

/// `min ½xᵀHx + gᵀx` over `K` for positive definite `H`: try every active
/// set and keep the KKT point with nonnegative multipliers.
pub fn qp_by_active_sets(h: &DMatrix<f64>, gv: &DVector<f64>, k: &Polytope) -> DVector<f64> {
    let (g, hh) = rows(k);
    let n = k.dim();
    let rows_total = g.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for size in 0..=n.min(rows_total) {
        for s in subsets(rows_total, size) {
            let dim = n + size;
            let mut kkt = DMatrix::zeros(dim, dim);
            let mut rhs = DVector::zeros(dim);
            kkt.view_mut((0, 0), (n, n)).copy_from(h);
            for (a, &row) in s.iter().enumerate() {
                for j in 0..n {
                    kkt[(j, n + a)] = g[(row, j)];
                    kkt[(n + a, j)] = g[(row, j)];
                }
                rhs[n + a] = hh[row];
            }
            for j in 0..n {
                rhs[j] = -gv[j];
            }
            let Some(sol) = solve_dense(&kkt, &rhs) else {
                continue;
            };
            let x = sol.rows(0, n).into_owned();
            let feasible = (&g * &x - &hh).max() <= 1e-9;
            let duals_ok = (0..size).all(|a| sol[n + a] >= -1e-9);
            if feasible && duals_ok {
                let val = 0.5 * x.dot(&(h * &x)) + gv.dot(&x);
                if best.as_ref().is_none_or(|(b, _)| val < *b) {
                    best = Some((val, x));
                }
            }
        }
    }
    best.expect("a KKT point exists for a PD QP over a nonempty polytope").1
}

/// Solutions of `w = T z + r ⊥ z ≥ 0` found by trying every complementary
/// basis.
pub fn lcp_by_bases(t: &DMatrix<f64>, r: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = r.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let s: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let tss = DMatrix::from_fn(s.len(), s.len(), |i, j| t[(s[i], s[j])]);
        let rs = DVector::from_fn(s.len(), |i, _| -r[s[i]]);
        let Some(zs) = solve_dense(&tss, &rs) else {
            continue;
        };
        let mut z = DVector::zeros(n);
        for (a, &i) in s.iter().enumerate() {
            z[i] = zs[a];
        }
        let w = t * &z + r;
        if z.min() >= -1e-9 && w.min() >= -1e-9 {
            out.push(z);
        }
    }
    out
}

pub fn gaussian_matrix(rng: &mut SeededRng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| standard_normal(rng))
}

pub fn random_pd(rng: &mut SeededRng, n: usize) -> DMatrix<f64> {
    let l = gaussian_matrix(rng, n, n);
    &l * l.transpose() + DMatrix::identity(n, n) * 0.1
}

/// Small random instance: `n ∈ 1..=4`, box half-width in `[1, 5]`, up to two
/// general rows that keep the box center strictly feasible. Odd seeds draw
/// uniform data, even seeds Gaussian.
pub fn small_instance(seed: u64) -> AviProblem {
    let mut rng = rng_from_seed(derive_seed(0x5EED, &[seed]));
    let n = 1 + (uniform01(&mut rng) * 4.0) as usize % 4;
    let m = (uniform01(&mut rng) * 3.0) as usize % 3;
    let uniform = seed % 2 == 1;
    let draw = |rng: &mut SeededRng| {
        if uniform {
            2.0 * uniform01(rng) - 1.0
        } else {
            standard_normal(rng)
        }
    };
    let mm = DMatrix::from_fn(n, n, |_, _| draw(&mut rng));
    let q = DVector::from_fn(n, |_, _| 2.0 * draw(&mut rng));
    let width = 1.0 + 4.0 * uniform01(&mut rng);
    let center = DVector::from_fn(n, |_, _| 0.5 * draw(&mut rng));
    let lower = center.add_scalar(-width);
    let upper = center.add_scalar(width);
    let a = DMatrix::from_fn(m, n, |_, _| draw(&mut rng));
    let b = DVector::from_fn(m, |i, _| {
        a.row(i).dot(&center.transpose()) + 0.2 + width * uniform01(&mut rng)
    });
    let k = Polytope::new(a, b, lower, upper).unwrap();
    AviProblem::new(mm, q, k).unwrap()
}

/// Brute-force natural-map residual with an active-set projection oracle.
pub fn residual_by_oracle(avi: &AviProblem, x: &DVector<f64>) -> f64 {
    let n = avi.dim();
    let step = x - (avi.m() * x + avi.q());
    let p = qp_by_active_sets(&DMatrix::identity(n, n), &(-step), avi.polytope());
    (x - p).norm() / (x.norm() + 1.0)
}

/// `min (x_e − x)ᵀ(q + Mx)` over the vertices of `K`.
pub fn worst_vertex_gap(avi: &AviProblem, x: &DVector<f64>) -> f64 {
    let g = avi.m() * x + avi.q();
    vertices(avi.polytope())
        .iter()
        .map(|e| (e - x).dot(&g))
        .fold(f64::INFINITY, f64::min)
}

pub fn project_box(k: &Polytope, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |j, _| x[j].clamp(k.lower()[j], k.upper()[j]))
}
