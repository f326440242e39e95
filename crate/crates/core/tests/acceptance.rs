//! Acceptance criteria, one line of output per criterion.
//!
//! Runs without the libtest harness so that every criterion reports, even
//! after an earlier one fails. The process exits nonzero if any fails.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use avired::avi::{min_lower_dimension, residual_metric, verify_by_vertices};
use avired::bench::{generate_problem, Distribution};
use avired::pipeline::{run_algorithm_a, run_exact_hot_start, theorem1_certificate, AlgorithmAOptions};
use avired::randproj::{
    binomial_margin, jl_inner_product_check, jl_norm_concentration, project_vector,
    ProjectionOperator,
};
use avired::rng::{derive_seed, rng_from_seed, standard_normal, uniform01};
use avired::solvers::{l1_recover, solve_avi, solve_convex_qp, solve_lp, AviSolveOptions, LinearProgram};
use avired::AviProblem;
use common::*;
use nalgebra::DVector;

type Verdict = (bool, String);

/// Size of the small-instance corpus shared by criteria 4 and 5.
const CORPUS: u64 = 200;

/// Name, time budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Verdict);

fn orthonormality_and_determinism() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut repeat_ok = true;
    for &(n, k) in &[(100, 5), (250, 225)] {
        for seed in 0..100u64 {
            let p = ProjectionOperator::sample(n, k, seed).unwrap();
            worst = worst.max(p.orthonormality_error());
            let q = ProjectionOperator::sample(n, k, seed).unwrap();
            repeat_ok &= p
                .matrix()
                .iter()
                .zip(q.matrix().iter())
                .all(|(a, b)| a.to_bits() == b.to_bits());
        }
    }
    (
        worst <= 1e-10 && repeat_ok,
        format!("max |RᵀR − I| = {worst:.2e}, bit-identical repeats: {repeat_ok}"),
    )
}

fn jl_norm() -> Verdict {
    let c = jl_norm_concentration(200, 50, 0.5, 2000, 2024).unwrap();
    let need = c.floor - binomial_margin(c.floor, c.trials);
    let mean_ok = (c.mean_statistic - 1.0).abs() <= 0.05;
    (
        c.fraction >= need && mean_ok,
        format!(
            "in-band {:.4} ≥ {need:.4} (floor {:.4}); mean ‖f(u)‖²/‖u‖² = {:.4}",
            c.fraction, c.floor, c.mean_statistic
        ),
    )
}

fn jl_inner_product() -> Verdict {
    let mut rng = rng_from_seed(77);
    let u = DVector::from_fn(200, |_, _| standard_normal(&mut rng));
    let w = DVector::from_fn(200, |_, _| standard_normal(&mut rng));
    let c = jl_inner_product_check(&u, &w, 50, 0.5, 2000, 2025).unwrap();
    let need = c.floor - binomial_margin(c.floor, c.trials);
    (
        c.fraction >= need,
        format!("in-band {:.4} ≥ {need:.4} (floor {:.4})", c.fraction, c.floor),
    )
}

fn solver_oracles() -> Verdict {
    let (mut avi_bad, mut qp_bad, mut lp_bad, mut avi_fail) = (0, 0, 0, 0);
    for seed in 0..CORPUS {
        let avi = small_instance(seed);
        let k = avi.polytope();
        match solve_avi(&avi, &AviSolveOptions::default()) {
            Ok(sol) => {
                if !verify_by_vertices(&avi, &sol.x, 1e-8).unwrap().is_solution {
                    avi_bad += 1;
                }
            }
            Err(_) => avi_fail += 1,
        }
        let mut rng = rng_from_seed(derive_seed(seed, &[4]));
        let n = avi.dim();
        let h = random_pd(&mut rng, n);
        let g = gaussian_matrix(&mut rng, n, 1).column(0) * 3.0;
        let (x, _) = solve_convex_qp(&h, &g, k).unwrap();
        if (x - qp_by_active_sets(&h, &g, k)).amax() > 1e-6 {
            qp_bad += 1;
        }
        let c = gaussian_matrix(&mut rng, n, 1).column(0).into_owned();
        let lp = LinearProgram::new(c.clone())
            .with_inequalities(k.a().clone(), k.b().clone())
            .with_bounds(k.lower().clone(), k.upper().clone());
        let value = solve_lp(&lp).unwrap().value;
        let oracle = lp_min_by_vertices(k, &c);
        if (value - oracle).abs() > 1e-7 * (1.0 + oracle.abs()) {
            lp_bad += 1;
        }
    }
    (
        avi_bad + qp_bad + lp_bad == 0,
        format!(
            "{CORPUS} instances: AVI mismatches {avi_bad} (solver failures {avi_fail}), \
             QP mismatches {qp_bad}, LP mismatches {lp_bad}"
        ),
    )
}

fn residual_vertex_equivalence() -> Verdict {
    let mut counterexamples = 0;
    let (mut solutions, mut others) = (0, 0);
    for seed in 0..CORPUS {
        let avi = small_instance(seed);
        let Ok(sol) = solve_avi(&avi, &AviSolveOptions::default()) else {
            continue;
        };
        let k = avi.polytope();
        let scale = (k.upper() - k.lower()).amax();
        let mut points = vec![sol.x.clone()];
        let mut rng = rng_from_seed(derive_seed(seed, &[5]));
        for _ in 0..3 {
            let kick = DVector::from_fn(avi.dim(), |_, _| standard_normal(&mut rng)) * (0.05 * scale);
            points.push(k.euclidean_project(&(&sol.x + kick)).unwrap());
        }
        for x in points {
            let small = residual_metric(&avi, &x).unwrap() <= 1e-6;
            let vertex_ok = verify_by_vertices(&avi, &x, 1e-8).unwrap().worst_violation >= -1e-6;
            if small {
                solutions += 1;
            } else {
                others += 1;
            }
            if small != vertex_ok {
                counterexamples += 1;
            }
        }
    }
    (
        counterexamples == 0,
        format!("{counterexamples} counterexamples over {solutions} solutions and {others} non-solutions"),
    )
}

fn identity_reduction() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for seed in 0..20u64 {
        let avi = generate_problem(20, 4, Distribution::Gaussian, derive_seed(6, &[seed]), (-100.0, 100.0))
            .unwrap();
        let opts = AlgorithmAOptions {
            k_override: Some(20),
            seed,
            ..Default::default()
        };
        match run_algorithm_a(&avi, &opts) {
            Ok(res) => worst = worst.max(residual_metric(&avi, &res.x_sharp).unwrap()),
            Err(_) => failures += 1,
        }
    }
    (
        failures == 0 && worst <= 1e-6,
        format!("max residual {worst:.2e}, failures {failures}"),
    )
}

fn residual_trend() -> Verdict {
    let ks = [2usize, 6, 10, 14, 18];
    let avi = generate_problem(20, 4, Distribution::Gaussian, derive_seed(7, &[20, 4]), (-100.0, 100.0))
        .unwrap();
    let mut means = Vec::new();
    let mut failures = 0;
    for &k in &ks {
        let mut sum = 0.0;
        let mut count = 0;
        for trial in 0..10u64 {
            let opts = AlgorithmAOptions {
                k_override: Some(k),
                seed: derive_seed(7, &[k as u64, trial]),
                ..Default::default()
            };
            match run_algorithm_a(&avi, &opts) {
                Ok(res) => {
                    sum += residual_metric(&avi, &res.x_sharp).unwrap();
                    count += 1;
                }
                Err(_) => failures += 1,
            }
        }
        means.push(sum / count.max(1) as f64);
    }
    let violations = means.windows(2).filter(|w| w[1] > w[0]).count();
    let pass = means[4] < means[0] && violations <= 1;
    let shown: Vec<String> = ks.iter().zip(&means).map(|(k, m)| format!("k={k}: {m:.4}")).collect();
    (
        pass,
        format!("{}; increases {violations}, failures {failures}", shown.join(", ")),
    )
}

fn certificate_fraction(k: Option<usize>) -> (usize, usize, usize) {
    let (mut hits, mut total, mut k_used) = (0, 0, 0);
    for seed in 0..50u64 {
        let avi = generate_problem(6, 0, Distribution::Gaussian, derive_seed(8, &[seed]), (-1.0, 1.0)).unwrap();
        let opts = AlgorithmAOptions {
            eps: 0.3,
            delta: 0.2,
            k_override: k,
            seed,
            ..Default::default()
        };
        let Ok(res) = run_algorithm_a(&avi, &opts) else {
            total += 1;
            continue;
        };
        k_used = res.k_used;
        total += 1;
        if theorem1_certificate(&avi, &res).unwrap().satisfied {
            hits += 1;
        }
    }
    (hits, total, k_used)
}

fn statistical_certificate() -> Verdict {
    let (hits, total, k_used) = certificate_fraction(None);
    let fraction = hits as f64 / total as f64;
    let need = 0.8 - binomial_margin(0.8, total);
    // A genuinely reduced dimension is reported alongside; it is not part of
    // the pass condition.
    let (hits3, total3, _) = certificate_fraction(Some(3));
    (
        fraction >= need,
        format!(
            "rule k = {k_used}: {hits}/{total} ≥ {need:.3}; at k = 3: {hits3}/{total3} (informational)"
        ),
    )
}

fn l1_recovery() -> Verdict {
    let (n, k) = (50, 25);
    let (mut exact, mut feasible) = (0, 0);
    for seed in 0..50u64 {
        let mut rng = rng_from_seed(derive_seed(9, &[seed]));
        let j = (uniform01(&mut rng) * n as f64) as usize % n;
        let mut x0 = DVector::zeros(n);
        x0[j] = if uniform01(&mut rng) < 0.5 { -1.0 } else { 1.0 } * (1.0 + 4.0 * uniform01(&mut rng));
        let p = ProjectionOperator::sample(n, k, seed).unwrap();
        let xt = project_vector(&p, &x0).unwrap();
        let Ok(rec) = l1_recover(&p, &xt, 10.0 * (1.0 + x0.amax())) else {
            continue;
        };
        if rec.residual <= 1e-7 {
            feasible += 1;
        }
        if (&rec.x - &x0).norm() <= 1e-6 {
            exact += 1;
        }
    }
    (
        exact >= 45 && feasible == 50,
        format!("exact {exact}/50 (need 45), feasible {feasible}/50"),
    )
}

fn hot_start() -> Verdict {
    let (mut warm, mut cold) = (0usize, 0usize);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for seed in 0..10u64 {
        let avi: AviProblem =
            generate_problem(20, 4, Distribution::Gaussian, derive_seed(10, &[seed]), (-100.0, 100.0)).unwrap();
        let opts = AlgorithmAOptions {
            k_override: Some(10),
            seed,
            ..Default::default()
        };
        match run_exact_hot_start(&avi, &opts) {
            Ok(hs) => {
                warm += hs.warm_stats.pivot_count;
                cold += hs.cold_stats.pivot_count;
                worst = worst
                    .max(residual_metric(&avi, &hs.x_exact).unwrap())
                    .max(residual_metric(&avi, &hs.cold_x).unwrap());
            }
            Err(_) => failures += 1,
        }
    }
    (
        failures == 0 && warm <= cold && worst <= 1e-6,
        format!(
            "mean pivots warm {:.1} vs cold {:.1}; max residual {worst:.2e}; failures {failures}",
            warm as f64 / 10.0,
            cold as f64 / 10.0
        ),
    )
}

fn reproducibility() -> Verdict {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_avired"))
            .args(["bench", "--n", "12", "--m", "3", "--k-list", "3,6,12", "--trials", "4", "--seed", "11"])
            .output()
            .expect("binary runs")
    };
    let (a, b) = (run(), run());
    let ok = a.status.success() && b.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
    (ok, format!("{} bytes, identical: {}", a.stdout.len(), a.stdout == b.stdout))
}

fn dimension_rule() -> Verdict {
    let k = min_lower_dimension(16f64.ln(), 0.5, 0.1, usize::MAX).unwrap().k;
    (k == 156, format!("k = {k}"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("orthonormality and determinism", 10, orthonormality_and_determinism),
        ("norm concentration", 30, jl_norm),
        ("inner-product preservation", 30, jl_inner_product),
        ("solver oracle equivalence", 60, solver_oracles),
        ("residual and vertex tests agree", 60, residual_vertex_equivalence),
        ("identity reduction is exact", 60, identity_reduction),
        ("residual decreases with k", 300, residual_trend),
        ("statistical certificate", 120, statistical_certificate),
        ("l1 recovery of sparse vectors", 60, l1_recovery),
        ("hot start saves pivots", 120, hot_start),
        ("bench output is reproducible", 60, reproducibility),
        ("dimension rule arithmetic", 1, dimension_rule),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let (ok, detail) = check();
        let elapsed = clock.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let pass = ok && in_time;
        failed += usize::from(!pass);
        println!(
            "{} {:>2} {name}: {detail} [{:.2}s of {budget}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
