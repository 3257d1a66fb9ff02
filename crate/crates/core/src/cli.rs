//! Command-line front end: `solve`, `bench` and `check`.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures
//! (a solve that does not converge, a failed self-check, I/O errors).

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

use crate::bench::{self, BenchSpec, ExportFormat, MethodRun, TrialSpec};
use crate::error::Error;
use crate::problems::{self, ProblemConfig, ProblemKind, RegularizerSpec, VectorSpec};
use crate::rank::RankParams;
use crate::relaxation::LogBase;
use crate::solver::{self, IterationRecord, Method};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mngn2",
    version,
    about = "Minimal-norm Gauss-Newton solvers for underdetermined nonlinear least squares"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solve and report the result.
    Solve(SolveArgs),
    /// Run several methods from random starting points and tabulate.
    Bench(BenchArgs),
    /// Check a problem's analytic Jacobian and known solution.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// robot, paraboloid, circle2d, ellipsoid-product, sphere-planes or chain
    #[arg(long, value_parser = parse_via::<ProblemKind>)]
    pub problem: ProblemKind,
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Semiaxes: ones, <v>e, first<v> or a comma list
    #[arg(long, default_value = "ones", value_parser = parse_via::<VectorSpec>)]
    pub a: VectorSpec,
    /// Center: two-e, first2, <v>e or a comma list
    #[arg(long, default_value = "two-e", value_parser = parse_via::<VectorSpec>)]
    pub c: VectorSpec,
    /// circle2d scale
    #[arg(long, default_value_t = 0.75, allow_negative_numbers = true)]
    pub delta: f64,
    /// circle2d center coordinate
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub gamma: f64,
}

impl ProblemArgs {
    fn config(&self) -> ProblemConfig {
        ProblemConfig {
            kind: self.problem,
            m: self.m,
            n: self.n,
            a: self.a.clone(),
            c: self.c.clone(),
            delta: self.delta,
            gamma: self.gamma,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Regularization matrix: identity, d1 or d2
    #[arg(long = "L", value_parser = parse_via::<RegularizerSpec>)]
    pub l: Option<RegularizerSpec>,
    /// Model profile: zero, <v>e, first<v> or a comma list
    #[arg(long, value_parser = parse_via::<VectorSpec>)]
    pub xbar: Option<VectorSpec>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Gap ratio R of the rank estimator
    #[arg(long, default_value_t = 1e2)]
    pub gap_ratio: f64,
    /// Floor on the large side of a rank gap
    #[arg(long, default_value_t = 1e-8)]
    pub rank_floor: f64,
    /// Logarithm used by the adaptive eta rule: ten or natural
    #[arg(long, default_value = "ten", value_parser = parse_log_base)]
    pub log_base: LogBase,
}

impl SolverArgs {
    fn rank_params(&self) -> RankParams {
        RankParams {
            gap_ratio: self.gap_ratio,
            value_floor: self.rank_floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// mngn, mngn2-a, mngn2-ab, mngn2-abd, ckb1, ckb2, rckb1 or rckb2
    #[arg(long, value_parser = parse_via::<Method>)]
    pub method: Method,
    /// Fixed eta (required by mngn2-ab)
    #[arg(long)]
    pub eta: Option<f64>,
    /// Starting point as a comma list; drawn from --seed when absent
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print every iteration
    #[arg(long)]
    pub trace: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub output: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comma list of method ids
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_via::<Method>)]
    pub methods: Vec<Method>,
    /// Fixed eta values for mngn2-ab; one row per value
    #[arg(long, value_delimiter = ',')]
    pub eta: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Draw separate starting points for every method
    #[arg(long)]
    pub independent_starts: bool,
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    pub x0_low: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub x0_high: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub output: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Random points for the Jacobian comparison
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_via<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr<Err = Error>,
{
    s.parse::<T>().map_err(|e| match e {
        Error::InvalidInput(msg) => msg,
        other => other.to_string(),
    })
}

fn parse_log_base(s: &str) -> Result<LogBase, String> {
    match s {
        "ten" | "10" => Ok(LogBase::Ten),
        "natural" | "e" => Ok(LogBase::Natural),
        _ => Err(format!("unknown log base '{s}' (valid: ten, natural)")),
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Option errors surface before any work starts, so they count as usage
/// errors.
fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Check(a) => cmd_check(a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn emit(text: &str, path: Option<&PathBuf>, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveReport<'a> {
    problem: &'a ProblemConfig,
    method: Method,
    x0: Vec<f64>,
    converged: bool,
    iterations: usize,
    x_final: Vec<f64>,
    norm: f64,
    residual_norm: f64,
    failure_reason: Option<solver::FailureReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<&'a [IterationRecord]>,
}

fn trace_table(trace: &[IterationRecord]) -> String {
    let mut s = format!(
        "{:>4}  {:>9}  {:>9}  {:>9}  {:>4}  {:>10}  {:>10}  {:>10}\n",
        "k", "alpha", "beta", "eta", "rank", "residual", "norm", "step"
    );
    for r in trace {
        let _ = writeln!(
            s,
            "{:>4}  {:>9.3e}  {:>9.3e}  {:>9.3e}  {:>4}  {:>10.4e}  {:>10.6}  {:>10.4e}",
            r.k, r.alpha, r.beta, r.eta, r.rank, r.residual_norm, r.solution_norm, r.step_norm
        );
    }
    s
}

fn trace_csv(trace: &[IterationRecord]) -> String {
    let mut s = String::from("k,alpha,beta,eta,rank,residual_norm,solution_norm,step_norm\n");
    for r in trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.k, r.alpha, r.beta, r.eta, r.rank, r.residual_norm, r.solution_norm, r.step_norm
        );
    }
    s
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    if a.method == Method::Mngn2AlphaBeta && a.eta.is_none() {
        return Err(Failure::Usage("mngn2-ab needs --eta".into()));
    }
    if a.method != Method::Mngn2AlphaBeta && a.eta.is_some() {
        return Err(Failure::Usage("--eta only applies to mngn2-ab".into()));
    }
    let config = a.problem.config();
    let mut spec = TrialSpec::new(
        config.clone(),
        MethodRun {
            method: a.method,
            eta: a.eta,
        },
    );
    spec.seed = a.seed;
    spec.model_profile = a.solver.xbar.clone();
    spec.regularizer = a.solver.l.clone();
    spec.stop_tol = a.solver.tol;
    spec.max_iter = a.solver.max_iter;
    spec.rank_params = a.solver.rank_params();
    spec.log_base = a.solver.log_base;
    let (tp, opts) = spec.prepare().map_err(usage)?;
    let n = tp.problem.var_dim();
    let x0 = match &a.x0 {
        Some(s) => {
            let v = problems::parse_list(s).map_err(usage)?;
            if v.len() != n {
                return Err(Failure::Usage(format!("--x0 has {} entries, expected {n}", v.len())));
            }
            DVector::from_vec(v)
        }
        None => spec.start(0, n),
    };
    let res = solver::solve(&tp.problem, &x0, &opts).map_err(usage)?;
    let norm = match &opts.regularizer {
        Some(l) => (l * &res.x_final).norm(),
        None => res.x_final.norm(),
    };
    let residual_norm = tp.problem.residual_norm(&res.x_final);
    let text = match a.output {
        OutputFormat::Json => {
            let report = SolveReport {
                problem: &config,
                method: a.method,
                x0: x0.as_slice().to_vec(),
                converged: res.converged,
                iterations: res.iterations,
                x_final: res.x_final.as_slice().to_vec(),
                norm,
                residual_norm,
                failure_reason: res.failure_reason,
                trace: a.trace.then_some(res.trace.as_slice()),
            };
            let mut s = serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => trace_csv(&res.trace),
        OutputFormat::Table => {
            let mut s = String::new();
            if a.trace {
                s.push_str(&trace_table(&res.trace));
            }
            let status = match res.failure_reason {
                None => "converged".to_string(),
                Some(f) => format!("failed ({f})"),
            };
            let xs: Vec<String> = res.x_final.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(s, "problem    {}", config.kind);
            let _ = writeln!(s, "method     {}", a.method);
            let _ = writeln!(s, "status     {status}");
            let _ = writeln!(s, "iterations {}", res.iterations);
            let _ = writeln!(s, "residual   {residual_norm:.4e}");
            let label = if opts.regularizer.is_some() { "|Lx|" } else { "|x|" };
            let _ = writeln!(s, "{label:<10} {norm:.6}");
            let _ = writeln!(s, "x          {}", xs.join(" "));
            s
        }
    };
    emit(&text, a.out.as_ref(), out)?;
    Ok(if res.converged { EXIT_OK } else { EXIT_RUNTIME })
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let wants_eta = a.methods.contains(&Method::Mngn2AlphaBeta);
    if wants_eta && a.eta.is_empty() {
        return Err(Failure::Usage("mngn2-ab needs --eta".into()));
    }
    if !wants_eta && !a.eta.is_empty() {
        return Err(Failure::Usage("--eta only applies to mngn2-ab".into()));
    }
    let mut runs = Vec::new();
    for &m in &a.methods {
        if m == Method::Mngn2AlphaBeta {
            runs.extend(a.eta.iter().map(|&eta| MethodRun::with_eta(m, eta)));
        } else {
            runs.push(MethodRun::new(m));
        }
    }
    let mut spec = BenchSpec::new(a.problem.config(), runs);
    spec.independent_starts = a.independent_starts;
    let t = &mut spec.template;
    t.n_trials = a.trials;
    t.seed = a.seed;
    t.x0_low = a.x0_low;
    t.x0_high = a.x0_high;
    t.model_profile = a.solver.xbar.clone();
    t.regularizer = a.solver.l.clone();
    t.stop_tol = a.solver.tol;
    t.max_iter = a.solver.max_iter;
    t.rank_params = a.solver.rank_params();
    t.log_base = a.solver.log_base;
    for ts in spec.trial_specs() {
        ts.prepare().map_err(usage)?;
    }
    if a.jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let report = bench::run_bench(&spec, a.jobs).map_err(|e| Failure::Runtime(e.to_string()))?;
    let format = match a.output {
        OutputFormat::Table => ExportFormat::Table,
        OutputFormat::Csv => ExportFormat::Csv,
        OutputFormat::Json => ExportFormat::Json,
    };
    let text = bench::export(&report, format).map_err(|e| Failure::Runtime(e.to_string()))?;
    emit(&text, a.out.as_ref(), out)?;
    Ok(EXIT_OK)
}

fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let tp = a.problem.config().build().map_err(usage)?;
    let outcomes = problems::check_problem(&tp, a.points, a.seed);
    let mut s = String::new();
    let _ = writeln!(s, "problem {}", tp.name);
    for o in &outcomes {
        let _ = writeln!(s, "{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    out.write_all(s.as_bytes())?;
    Ok(if outcomes.iter().all(|o| o.passed) {
        EXIT_OK
    } else {
        EXIT_RUNTIME
    })
}
