//! The `avired` command line: `solve`, `reduce` and `bench`.
//!
//! Exit codes: 0 success, 2 parse or usage error, 3 empty feasible set,
//! 4 solver failure, 5 pipeline stage failure.

pub mod problem_file;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::{json, Value};

pub use problem_file::{format_problem, parse_problem, ParseError, ProblemFile};

use crate::avi::{difference_norm, quality_report, AviProblem};
use crate::bench::{
    aggregate_csv, generate_problem, run_experiment, trials_csv, Distribution, ExperimentConfig,
    Mode,
};
use crate::error::Error;
use crate::pipeline::{run_algorithm_a, run_exact_hot_start, AlgorithmAOptions, AlgorithmAResult, PipelineError};
use crate::solvers::{solve_avi, AviSolveOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_PIPELINE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "avired", version, about = "Random-projection reduction for affine variational inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistArg {
    #[value(alias = "gaussian")]
    Gauss,
    Uniform,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Approx,
    Exact,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an AVI directly in full dimension.
    Solve {
        problem: PathBuf,
        /// Write the solution document (JSON) here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = AviSolveOptions::default().max_pivots)]
        max_pivots: usize,
    },
    /// Solve an AVI through a random projection to a lower dimension.
    Reduce {
        problem: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Lower dimension; chosen by the dimension rule when omitted.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override ln η, the log of the vertex-count bound.
        #[arg(long)]
        ln_eta: Option<f64>,
        #[arg(long, value_enum, default_value_t = ModeArg::Approx)]
        mode: ModeArg,
        /// Write the result document (JSON) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a randomized experiment and write aggregated CSV.
    Bench {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        m: usize,
        /// Comma-separated lower dimensions.
        #[arg(long, value_delimiter = ',', required = true)]
        k_list: Vec<usize>,
        #[arg(long, value_enum, default_value_t = DistArg::Gauss)]
        dist: DistArg,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Approx)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = -100.0, allow_hyphen_values = true)]
        box_lower: f64,
        #[arg(long, default_value_t = 100.0)]
        box_upper: f64,
        /// Aggregated CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one CSV row per trial.
        #[arg(long)]
        per_trial: Option<PathBuf>,
        /// Write the generated problem in the problem-file format.
        #[arg(long)]
        dump_problem: Option<PathBuf>,
        /// Fill the wall_time_s column (makes output run-dependent).
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Parse(String),
    Domain(Error),
    Pipeline(PipelineError),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => EXIT_PARSE,
            CliError::Domain(e) => domain_exit_code(e),
            CliError::Pipeline(p) if p.source == Error::InfeasibleSet => EXIT_INFEASIBLE,
            CliError::Pipeline(_) => EXIT_PIPELINE,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Parse(m) => m.clone(),
            CliError::Domain(e) => e.to_string(),
            CliError::Pipeline(p) => p.to_string(),
        }
    }
}

fn domain_exit_code(e: &Error) -> i32 {
    match e {
        Error::InfeasibleSet => EXIT_INFEASIBLE,
        Error::InvalidDimensions(_)
        | Error::DimensionMismatch { .. }
        | Error::ParameterOutOfRange(_)
        | Error::DimensionTooLarge { .. } => EXIT_PARSE,
        _ => EXIT_SOLVER,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> Result<(ProblemFile, AviProblem), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file = parse_problem(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let avi = file.to_problem()?;
    Ok((file, avi))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_solve(path: &Path, out_path: Option<&Path>, max_pivots: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let (file, avi) = load(path)?;
    let sol = solve_avi(&avi, &AviSolveOptions { max_pivots })?;
    let quality = quality_report(&avi, &sol.x, file.reference_solution.as_ref())?;
    let _ = writeln!(out, "status: solved");
    let _ = writeln!(out, "x: {}", fmt_vec(&sol.x));
    let _ = writeln!(out, "natural_map_residual: {}", quality.natural_map_residual);
    let _ = writeln!(out, "angle_deg: {}", quality.angle_deg);
    if let Some(d) = quality.difference_norm {
        let _ = writeln!(out, "difference_norm: {d}");
    }
    let _ = writeln!(
        out,
        "pivots: {} refactorizations: {}",
        sol.stats.pivot_count, sol.stats.refactorization_count
    );
    if let Some(p) = out_path {
        let doc = json!({
            "x": vec_json(&sol.x),
            "quality": quality,
            "stats": sol.stats,
        });
        write_file(p, &format!("{:#}\n", doc))?;
    }
    Ok(())
}

fn result_json(r: &AlgorithmAResult) -> Value {
    json!({
        "x_sharp": vec_json(&r.x_sharp),
        "x_star": vec_json(&r.x_star),
        "x_tilde": vec_json(&r.x_tilde),
        "k_used": r.k_used,
        "k_rule": r.k_rule,
        "eps": r.eps,
        "delta": r.delta,
        "ln_eta": r.ln_eta,
        "epsilon_hat": r.epsilon_hat,
        "reduced_stats": r.reduced_stats,
        "recovery_stats": r.recovery_stats,
        "recovery_residual": r.recovery_residual,
        "seed": r.seed,
        "timings": r.timings,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_reduce(
    path: &Path,
    opts: AlgorithmAOptions,
    mode: ModeArg,
    out_path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let (file, avi) = load(path)?;
    let reference = file.reference_solution.as_ref();
    let (result, exact) = match mode {
        ModeArg::Approx => (run_algorithm_a(&avi, &opts)?, None),
        ModeArg::Exact => {
            let hs = run_exact_hot_start(&avi, &opts)?;
            (hs.result.clone(), Some(hs))
        }
    };
    let quality = quality_report(&avi, &result.x_sharp, reference)?;
    if opts.k_override.is_none() && result.k_rule.clamped {
        let _ = writeln!(
            err,
            "warning: dimension rule asks for k >= {:.3} > n = {}; using k = n",
            result.k_rule.unclamped,
            avi.dim()
        );
    }
    let _ = writeln!(out, "k: {} (ln eta = {})", result.k_used, result.ln_eta);
    let _ = writeln!(out, "x_sharp: {}", fmt_vec(&result.x_sharp));
    let _ = writeln!(out, "natural_map_residual: {}", quality.natural_map_residual);
    let _ = writeln!(out, "angle_deg: {}", quality.angle_deg);
    if let Some(d) = quality.difference_norm {
        let _ = writeln!(out, "difference_norm: {d}");
    }
    let _ = writeln!(out, "epsilon_hat: {}", result.epsilon_hat);
    let _ = writeln!(
        out,
        "reduced pivots: {} refactorizations: {}",
        result.reduced_stats.pivot_count, result.reduced_stats.refactorization_count
    );
    let mut doc = result_json(&result);
    doc["quality"] = json!(quality);
    if let Some(hs) = &exact {
        let _ = writeln!(
            out,
            "exact: warm pivots {} cold pivots {}",
            hs.warm_stats.pivot_count, hs.cold_stats.pivot_count
        );
        let exact_diff = difference_norm(&hs.x_exact, &hs.cold_x)?;
        doc["exact"] = json!({
            "x_exact": vec_json(&hs.x_exact),
            "warm_stats": hs.warm_stats,
            "cold_stats": hs.cold_stats,
            "warm_vs_cold_difference_norm": exact_diff,
        });
    }
    if let Some(p) = out_path {
        write_file(p, &format!("{:#}\n", doc))?;
    }
    Ok(())
}

fn run_command(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Solve {
            problem,
            out: out_path,
            max_pivots,
        } => cmd_solve(&problem, out_path.as_deref(), max_pivots, out),
        Command::Reduce {
            problem,
            eps,
            delta,
            k,
            seed,
            ln_eta,
            mode,
            out: out_path,
        } => {
            let opts = AlgorithmAOptions {
                eps,
                delta,
                k_override: k,
                seed,
                ln_eta,
                solver: AviSolveOptions::default(),
            };
            cmd_reduce(&problem, opts, mode, out_path.as_deref(), out, err)
        }
        Command::Bench {
            n,
            m,
            k_list,
            dist,
            trials,
            seed,
            mode,
            eps,
            delta,
            box_lower,
            box_upper,
            out: out_path,
            per_trial,
            dump_problem,
            timing,
        } => {
            let cfg = ExperimentConfig {
                n,
                m,
                k_list,
                distribution: match dist {
                    DistArg::Gauss => Distribution::Gaussian,
                    DistArg::Uniform => Distribution::Uniform,
                },
                trials,
                base_seed: seed,
                box_lower,
                box_upper,
                mode: match mode {
                    ModeArg::Approx => Mode::Approx,
                    ModeArg::Exact => Mode::Exact,
                },
                eps,
                delta,
            };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            if let Some(p) = &dump_problem {
                let avi = generate_problem(n, m, cfg.distribution, cfg.problem_seed(), (box_lower, box_upper))?;
                write_file(p, &format_problem(&ProblemFile::from_problem(&avi, None)))?;
            }
            let report = run_experiment(&cfg)?;
            let csv = aggregate_csv(&report.rows, timing);
            match &out_path {
                Some(p) => write_file(p, &csv)?,
                None => {
                    let _ = out.write_all(csv.as_bytes());
                }
            }
            if let Some(p) = &per_trial {
                write_file(p, &trials_csv(&report.trials, timing))?;
            }
            Ok(())
        }
    }
}

/// Run the command line and return the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match run_command(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}
