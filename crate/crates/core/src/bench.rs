//! Random instances and multi-trial experiments with CSV output.
//!
//! One problem is drawn per `(n, m, base_seed)` and solved once in full
//! dimension; every `(k, trial)` pair then gets its own projection seed.
//! Trials run in parallel but are reported in `(k, trial)` order, so the
//! output does not depend on scheduling.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::avi::{quality_report, AviProblem};
use crate::error::{Error, Result};
use crate::pipeline::{run_algorithm_a, AlgorithmAOptions};
use crate::polytope::Polytope;
use crate::rng::{derive_seed, rng_from_seed, standard_normal, uniform01};
use crate::solvers::{solve_avi, solve_avi_warm, AviSolveOptions, SolveStats};

/// Environment variable holding the worker-thread count for trials.
pub const THREADS_ENV: &str = "AVIRED_THREADS";

pub const CSV_HEADER: &str = "n,k,m,natural_map_residual,angle_deg,difference_norm,pivots_low,refactors_low,pivots_high,refactors_high,pivots_additional,pivots_total,failures,wall_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Approx,
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub k_list: Vec<usize>,
    pub distribution: Distribution,
    pub trials: usize,
    pub base_seed: u64,
    pub box_lower: f64,
    pub box_upper: f64,
    pub mode: Mode,
    pub eps: f64,
    pub delta: f64,
}

impl ExperimentConfig {
    pub fn new(n: usize, m: usize, k_list: Vec<usize>) -> Self {
        Self {
            n,
            m,
            k_list,
            distribution: Distribution::Gaussian,
            trials: 10,
            base_seed: 0,
            box_lower: -100.0,
            box_upper: 100.0,
            mode: Mode::Approx,
            eps: 0.5,
            delta: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidDimensions("n must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::ParameterOutOfRange("trials must be at least 1".into()));
        }
        if self.k_list.is_empty() {
            return Err(Error::ParameterOutOfRange("k list is empty".into()));
        }
        if let Some(&k) = self.k_list.iter().find(|&&k| k == 0 || k > self.n) {
            return Err(Error::InvalidDimensions(format!("k = {k} must lie in [1, {}]", self.n)));
        }
        if !(self.box_lower.is_finite() && self.box_upper.is_finite() && self.box_lower < self.box_upper) {
            return Err(Error::ParameterOutOfRange("box bounds must be finite with lower < upper".into()));
        }
        Ok(())
    }

    /// Seed of the shared problem instance.
    pub fn problem_seed(&self) -> u64 {
        derive_seed(self.base_seed, &[self.n as u64, self.m as u64])
    }

    /// Seed of the projection for trial `trial` at dimension `k`.
    pub fn trial_seed(&self, k: usize, trial: usize) -> u64 {
        derive_seed(self.base_seed, &[k as u64, trial as u64])
    }
}

/// Random `AVI(K, M, q)` with `K = {Ax ≤ b, lower ≤ x ≤ upper}`. Entries are
/// drawn in the order `M` (row-major), `q`, `A` (row-major), `b`.
pub fn generate_problem(
    n: usize,
    m: usize,
    distribution: Distribution,
    seed: u64,
    bounds: (f64, f64),
) -> Result<AviProblem> {
    if n == 0 {
        return Err(Error::InvalidDimensions("n must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut draw = || match distribution {
        Distribution::Gaussian => standard_normal(&mut rng),
        Distribution::Uniform => uniform01(&mut rng),
    };
    let mm: Vec<f64> = (0..n * n).map(|_| draw()).collect();
    let q: Vec<f64> = (0..n).map(|_| draw()).collect();
    let a: Vec<f64> = (0..m * n).map(|_| draw()).collect();
    let b: Vec<f64> = (0..m).map(|_| draw()).collect();
    let k = Polytope::new(
        DMatrix::from_row_slice(m, n, &a),
        DVector::from_vec(b),
        DVector::from_element(n, bounds.0),
        DVector::from_element(n, bounds.1),
    )?;
    AviProblem::new(DMatrix::from_row_slice(n, n, &mm), DVector::from_vec(q), k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
    pub natural_map_residual: f64,
    pub angle_deg: f64,
    pub difference_norm: f64,
    pub pivots_low: usize,
    pub refactors_low: usize,
    pub pivots_high: usize,
    pub refactors_high: usize,
    pub pivots_additional: Option<usize>,
    pub pivots_total: Option<usize>,
    pub wall_time_s: f64,
    /// Failure description; metric fields are meaningless when set.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub natural_map_residual: f64,
    pub angle_deg: f64,
    pub difference_norm: f64,
    pub pivots_low: f64,
    pub refactors_low: f64,
    pub pivots_high: f64,
    pub refactors_high: f64,
    pub pivots_additional: Option<f64>,
    pub pivots_total: Option<f64>,
    pub failures: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub trials: Vec<TrialReport>,
    pub rows: Vec<AggregateRow>,
    pub high_stats: SolveStats,
}

/// Threads requested through [`THREADS_ENV`], if set and valid.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&t| t > 0)
}

fn run_trial(
    cfg: &ExperimentConfig,
    avi: &AviProblem,
    reference: &DVector<f64>,
    high: &SolveStats,
    k: usize,
    trial: usize,
) -> TrialReport {
    let seed = cfg.trial_seed(k, trial);
    let mut report = TrialReport {
        n: cfg.n,
        k,
        m: cfg.m,
        trial,
        seed,
        natural_map_residual: f64::NAN,
        angle_deg: f64::NAN,
        difference_norm: f64::NAN,
        pivots_low: 0,
        refactors_low: 0,
        pivots_high: high.pivot_count,
        refactors_high: high.refactorization_count,
        pivots_additional: None,
        pivots_total: None,
        wall_time_s: 0.0,
        failure: None,
    };
    let opts = AlgorithmAOptions {
        eps: cfg.eps,
        delta: cfg.delta,
        k_override: Some(k),
        seed,
        ..Default::default()
    };
    let clock = Instant::now();
    let outcome = run_algorithm_a(avi, &opts).map_err(|e| e.to_string()).and_then(|res| {
        report.pivots_low = res.reduced_stats.pivot_count;
        report.refactors_low = res.reduced_stats.refactorization_count;
        if cfg.mode == Mode::Exact {
            let warm = solve_avi_warm(avi, &res.x_sharp, &opts.solver).map_err(|e| e.to_string())?;
            report.pivots_additional = Some(warm.stats.pivot_count);
            report.pivots_total = Some(res.reduced_stats.pivot_count + warm.stats.pivot_count);
        }
        quality_report(avi, &res.x_sharp, Some(reference)).map_err(|e| e.to_string())
    });
    report.wall_time_s = clock.elapsed().as_secs_f64();
    match outcome {
        Ok(q) => {
            report.natural_map_residual = q.natural_map_residual;
            report.angle_deg = q.angle_deg;
            report.difference_norm = q.difference_norm.unwrap_or(f64::NAN);
        }
        Err(msg) => report.failure = Some(msg),
    }
    report
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Arithmetic means over the successful trials of each `k`.
pub fn aggregate(trials: &[TrialReport], k_list: &[usize]) -> Vec<AggregateRow> {
    k_list
        .iter()
        .filter_map(|&k| {
            let all: Vec<&TrialReport> = trials.iter().filter(|t| t.k == k).collect();
            let first = all.first()?;
            let ok: Vec<&TrialReport> = all.iter().copied().filter(|t| t.failure.is_none()).collect();
            let avg = |f: &dyn Fn(&TrialReport) -> f64| mean(ok.iter().map(|t| f(t)));
            let avg_opt = |f: &dyn Fn(&TrialReport) -> Option<usize>| {
                let vals: Vec<f64> = ok.iter().filter_map(|t| f(t)).map(|v| v as f64).collect();
                (!vals.is_empty()).then(|| mean(vals.into_iter()))
            };
            Some(AggregateRow {
                n: first.n,
                k,
                m: first.m,
                natural_map_residual: avg(&|t| t.natural_map_residual),
                angle_deg: avg(&|t| t.angle_deg),
                difference_norm: avg(&|t| t.difference_norm),
                pivots_low: avg(&|t| t.pivots_low as f64),
                refactors_low: avg(&|t| t.refactors_low as f64),
                pivots_high: avg(&|t| t.pivots_high as f64),
                refactors_high: avg(&|t| t.refactors_high as f64),
                pivots_additional: avg_opt(&|t| t.pivots_additional),
                pivots_total: avg_opt(&|t| t.pivots_total),
                failures: all.len() - ok.len(),
                wall_time_s: avg(&|t| t.wall_time_s),
            })
        })
        .collect()
}

/// Generate the problem, solve it once in full dimension, then run every
/// `(k, trial)` pair.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let avi = generate_problem(
        cfg.n,
        cfg.m,
        cfg.distribution,
        cfg.problem_seed(),
        (cfg.box_lower, cfg.box_upper),
    )?;
    let high = solve_avi(&avi, &AviSolveOptions::default())?;
    let jobs: Vec<(usize, usize)> = cfg
        .k_list
        .iter()
        .flat_map(|&k| (0..cfg.trials).map(move |t| (k, t)))
        .collect();
    let work = || -> Vec<TrialReport> {
        jobs.par_iter()
            .map(|&(k, t)| run_trial(cfg, &avi, &high.x, &high.stats, k, t))
            .collect()
    };
    let trials = match threads_from_env() {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?
            .install(work),
        None => work(),
    };
    let rows = aggregate(&trials, &cfg.k_list);
    Ok(ExperimentReport {
        trials,
        rows,
        high_stats: high.stats,
    })
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Aggregate CSV. Wall time is left empty unless `timing` is set, so that
/// repeated runs produce identical bytes.
pub fn aggregate_csv(rows: &[AggregateRow], timing: bool) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.k,
            r.m,
            fmt_f(r.natural_map_residual),
            fmt_f(r.angle_deg),
            fmt_f(r.difference_norm),
            fmt_f(r.pivots_low),
            fmt_f(r.refactors_low),
            fmt_f(r.pivots_high),
            fmt_f(r.refactors_high),
            fmt_opt(r.pivots_additional),
            fmt_opt(r.pivots_total),
            r.failures,
            if timing { fmt_f(r.wall_time_s) } else { String::new() },
        );
    }
    out
}

/// One line per trial, in `(k, trial)` order.
pub fn trials_csv(trials: &[TrialReport], timing: bool) -> String {
    let mut out = String::from(
        "n,k,m,trial,seed,natural_map_residual,angle_deg,difference_norm,pivots_low,refactors_low,pivots_high,refactors_high,pivots_additional,pivots_total,failure,wall_time_s\n",
    );
    for t in trials {
        let failure = t.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            t.n,
            t.k,
            t.m,
            t.trial,
            t.seed,
            fmt_f(t.natural_map_residual),
            fmt_f(t.angle_deg),
            fmt_f(t.difference_norm),
            t.pivots_low,
            t.refactors_low,
            t.pivots_high,
            t.refactors_high,
            fmt_opt(t.pivots_additional),
            fmt_opt(t.pivots_total),
            failure,
            if timing { fmt_f(t.wall_time_s) } else { String::new() },
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate_problem(5, 2, Distribution::Gaussian, 9, (-100.0, 100.0)).unwrap();
        let b = generate_problem(5, 2, Distribution::Gaussian, 9, (-100.0, 100.0)).unwrap();
        assert_eq!(a, b);
        let c = generate_problem(5, 2, Distribution::Gaussian, 10, (-100.0, 100.0)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_entries_in_unit_interval() {
        let p = generate_problem(8, 3, Distribution::Uniform, 1, (-1.0, 1.0)).unwrap();
        let all = p
            .m()
            .iter()
            .chain(p.q().iter())
            .chain(p.polytope().a().iter())
            .chain(p.polytope().b().iter());
        assert!(all.into_iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::new(4, 1, vec![5]);
        assert!(cfg.validate().is_err());
        cfg.k_list = vec![2];
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        cfg.trials = 1;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn aggregation_skips_failures() {
        let base = TrialReport {
            n: 3,
            k: 2,
            m: 0,
            trial: 0,
            seed: 0,
            natural_map_residual: 1.0,
            angle_deg: 90.0,
            difference_norm: 0.5,
            pivots_low: 4,
            refactors_low: 1,
            pivots_high: 6,
            refactors_high: 1,
            pivots_additional: None,
            pivots_total: None,
            wall_time_s: 0.0,
            failure: None,
        };
        let second = TrialReport {
            trial: 1,
            natural_map_residual: 3.0,
            ..base.clone()
        };
        let failed = TrialReport {
            trial: 2,
            failure: Some("x".into()),
            natural_map_residual: f64::NAN,
            ..base.clone()
        };
        let rows = aggregate(&[base, second, failed], &[2]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].natural_map_residual, 2.0);
        assert_eq!(rows[0].failures, 1);
        assert_eq!(rows[0].pivots_additional, None);
    }
}
