//! Repeated solves from random starting points, with per-method statistics.
//!
//! Trial `t` draws its start from a ChaCha8 stream keyed by `(seed, t)`, so a
//! report depends only on its spec, never on thread count or scheduling.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{ProblemConfig, RegularizerSpec, TestProblem, VectorSpec};
use crate::rank::RankParams;
use crate::relaxation::LogBase;
use crate::solver::{self, FailureReason, Method, SolveOptions};

/// A method together with its fixed `eta`, if any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl MethodRun {
    pub fn new(method: Method) -> Self {
        MethodRun { method, eta: None }
    }

    pub fn with_eta(method: Method, eta: f64) -> Self {
        MethodRun { method, eta: Some(eta) }
    }

    pub fn label(&self) -> String {
        match (self.method, self.eta) {
            (Method::Mngn2AlphaBeta, Some(eta)) => format!("{}(eta={eta})", self.method),
            (m, _) => m.to_string(),
        }
    }
}

/// Everything needed to run one method over a batch of random starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub problem: ProblemConfig,
    pub run: MethodRun,
    pub n_trials: usize,
    pub seed: u64,
    pub x0_low: f64,
    pub x0_high: f64,
    #[serde(default)]
    pub model_profile: Option<VectorSpec>,
    #[serde(default)]
    pub regularizer: Option<RegularizerSpec>,
    pub stop_tol: f64,
    pub max_iter: usize,
    pub rank_params: RankParams,
    #[serde(default)]
    pub log_base: LogBase,
    /// Extra stream key mixed into every start; 0 shares starts across
    /// methods.
    #[serde(default)]
    pub stream_offset: u64,
}

impl TrialSpec {
    pub fn new(problem: ProblemConfig, run: MethodRun) -> Self {
        TrialSpec {
            problem,
            run,
            n_trials: 100,
            seed: 0,
            x0_low: -5.0,
            x0_high: 5.0,
            model_profile: None,
            regularizer: None,
            stop_tol: 1e-8,
            max_iter: 500,
            rank_params: RankParams::default(),
            log_base: LogBase::default(),
            stream_offset: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be at least 1"));
        }
        if !(self.x0_low < self.x0_high) || !self.x0_low.is_finite() || !self.x0_high.is_finite() {
            return Err(Error::invalid("need finite x0_low < x0_high"));
        }
        Ok(())
    }

    /// Builds the problem and the solver options shared by every trial.
    pub fn prepare(&self) -> Result<(TestProblem, SolveOptions)> {
        self.validate()?;
        let tp = self.problem.build()?;
        let n = tp.problem.var_dim();
        let mut opts = SolveOptions::new(self.run.method);
        opts.stop_tol = self.stop_tol;
        opts.max_iter = self.max_iter;
        opts.rank_params = self.rank_params;
        opts.fixed_eta = self.run.eta;
        opts.log_base = self.log_base;
        if let Some(xbar) = &self.model_profile {
            opts.model_profile = Some(xbar.build(n)?);
        }
        if let Some(l) = &self.regularizer {
            opts.regularizer = Some(l.matrix(n)?);
        }
        // surface option errors before the batch starts
        solver::solve(
            &tp.problem,
            &DVector::zeros(n),
            &SolveOptions {
                max_iter: 1,
                ..opts.clone()
            },
        )?;
        Ok((tp, opts))
    }

    /// Starting point of trial `t`.
    pub fn start(&self, t: usize, n: usize) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.stream_offset << 32) ^ t as u64);
        DVector::from_fn(n, |_, _| rng.random_range(self.x0_low..self.x0_high))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: String,
    pub seed_index: usize,
    pub x0: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `|x_final|`, or `|L x_final|` with a regularizer.
    pub norm: f64,
    pub failure_reason: Option<FailureReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub method: String,
    pub n_trials: usize,
    pub n_success: usize,
    /// Averages over converged trials; absent when none converged.
    pub avg_iterations: Option<f64>,
    pub avg_norm: Option<f64>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

/// `(avg_iterations, avg_norm, n_success)` over the converged records.
/// Sums run in trial order, so the result does not depend on record order.
pub fn summarize(records: &[TrialRecord]) -> (Option<f64>, Option<f64>, usize) {
    let mut ok: Vec<&TrialRecord> = records.iter().filter(|r| r.converged).collect();
    ok.sort_by(|a, b| (a.seed_index, &a.method).cmp(&(b.seed_index, &b.method)));
    if ok.is_empty() {
        return (None, None, 0);
    }
    let k = ok.len() as f64;
    let it = ok.iter().map(|r| r.iterations as f64).sum::<f64>() / k;
    let norm = ok.iter().map(|r| r.norm).sum::<f64>() / k;
    (Some(it), Some(norm), ok.len())
}

fn run_one(spec: &TrialSpec, tp: &TestProblem, opts: &SolveOptions, t: usize) -> TrialRecord {
    let n = tp.problem.var_dim();
    let x0 = spec.start(t, n);
    let label = spec.run.label();
    let reg: Option<&DMatrix<f64>> = opts.regularizer.as_ref();
    match solver::solve(&tp.problem, &x0, opts) {
        Ok(res) => TrialRecord {
            method: label,
            seed_index: t,
            x0: x0.as_slice().to_vec(),
            converged: res.converged,
            iterations: res.iterations,
            norm: match reg {
                Some(l) => (l * &res.x_final).norm(),
                None => res.x_final.norm(),
            },
            failure_reason: res.failure_reason,
        },
        Err(_) => TrialRecord {
            method: label,
            seed_index: t,
            x0: x0.as_slice().to_vec(),
            converged: false,
            iterations: 0,
            norm: f64::NAN,
            failure_reason: Some(FailureReason::FactorizationError),
        },
    }
}

/// Runs every trial of `spec` on the current rayon pool. Failed trials are
/// recorded, never fatal.
pub fn run_trials(spec: &TrialSpec) -> Result<BenchSummary> {
    let (tp, opts) = spec.prepare()?;
    let records: Vec<TrialRecord> = (0..spec.n_trials)
        .into_par_iter()
        .map(|t| run_one(spec, &tp, &opts, t))
        .collect();
    let (avg_iterations, avg_norm, n_success) = summarize(&records);
    Ok(BenchSummary {
        method: spec.run.label(),
        n_trials: spec.n_trials,
        n_success,
        avg_iterations,
        avg_norm,
        records,
    })
}

/// Several methods on one problem with shared settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    #[serde(flatten)]
    pub template: TrialSpec,
    pub methods: Vec<MethodRun>,
    /// Give every method its own starting points instead of sharing them.
    #[serde(default)]
    pub independent_starts: bool,
}

impl BenchSpec {
    pub fn new(problem: ProblemConfig, methods: Vec<MethodRun>) -> Self {
        let first = methods
            .first()
            .copied()
            .unwrap_or(MethodRun::new(Method::Mngn2AlphaBetaDelta));
        BenchSpec {
            template: TrialSpec::new(problem, first),
            methods,
            independent_starts: false,
        }
    }

    pub fn trial_specs(&self) -> Vec<TrialSpec> {
        self.methods
            .iter()
            .enumerate()
            .map(|(i, run)| TrialSpec {
                run: *run,
                stream_offset: if self.independent_starts { i as u64 + 1 } else { 0 },
                ..self.template.clone()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub spec: BenchSpec,
    pub rows: Vec<BenchSummary>,
    pub trials: Vec<TrialRecord>,
}

/// Runs all methods of `spec`; `jobs` caps the number of worker threads.
pub fn run_bench(spec: &BenchSpec, jobs: Option<usize>) -> Result<BenchReport> {
    if spec.methods.is_empty() {
        return Err(Error::invalid("no methods given"));
    }
    let go = || -> Result<BenchReport> {
        let mut rows = Vec::new();
        let mut trials = Vec::new();
        for ts in spec.trial_specs() {
            let mut summary = run_trials(&ts)?;
            trials.append(&mut summary.records);
            rows.push(summary);
        }
        Ok(BenchReport {
            spec: spec.clone(),
            rows,
            trials,
        })
    };
    match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?
            .install(go),
        None => go(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ExportFormat::Table),
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            _ => Err(Error::invalid(format!(
                "unknown format '{s}' (valid: table, csv, json)"
            ))),
        }
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"))
}

pub fn export(report: &BenchReport, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Csv => {
            let mut s = String::from("method,iterations,norm,success\n");
            for r in &report.rows {
                let it = r.avg_iterations.map_or(String::new(), |v| v.to_string());
                let nm = r.avg_norm.map_or(String::new(), |v| v.to_string());
                let _ = writeln!(s, "{},{it},{nm},{}", r.method, r.n_success);
            }
            Ok(s)
        }
        ExportFormat::Json => serde_json::to_string_pretty(report)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::invalid(format!("cannot serialize report: {e}"))),
        ExportFormat::Table => {
            let norm_head = if report.spec.template.regularizer.is_some() {
                "|Lx|"
            } else {
                "|x|"
            };
            let width = report
                .rows
                .iter()
                .map(|r| r.method.len())
                .chain(std::iter::once(6))
                .max()
                .unwrap_or(6);
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{:<width$}  {:>10}  {:>8}  {:>8}",
                "method", "iterations", norm_head, "#success"
            );
            for r in &report.rows {
                let _ = writeln!(
                    s,
                    "{:<width$}  {:>10}  {:>8}  {:>8}",
                    r.method,
                    opt(r.avg_iterations, 0),
                    opt(r.avg_norm, 4),
                    r.n_success
                );
            }
            Ok(s)
        }
    }
}
