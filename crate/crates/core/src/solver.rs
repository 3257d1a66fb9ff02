//! Minimal-norm Gauss-Newton iterations.
//!
//! Every variant builds the Gauss-Newton step `s_tilde` from the leading
//! `rank` singular (or generalized singular) triplets of the Jacobian and a
//! correction `t` that projects `x - xbar` onto the null space of the
//! Jacobian. The variants differ in how the two are combined:
//!
//! | method      | update                                         |
//! |-------------|------------------------------------------------|
//! | `mngn`      | `x + alpha s_tilde - t`                        |
//! | `mngn2-a`   | `x + alpha (s_tilde - t)`                      |
//! | `mngn2-ab`  | `x + alpha s_tilde - beta t`, `delta = eta rho`|
//! | `mngn2-abd` | same, `delta = rho^eta` with adaptive `eta`    |
//! | `ckb1/2`    | `x + s_tilde - gamma_k P x`                    |
//! | `rckb1/2`   | as `ckb`, with rank estimation                 |
//!
//! When a regularization matrix `L` is supplied, the GSVD of `(J, L)`
//! replaces the SVD and `t` becomes an oblique projection.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, GsvdFactors, NullSpaceBasis, SvdFactors};
use crate::problems;
use crate::rank::{self, RankParams};
use crate::relaxation::{self, BetaState, DeltaMode, EtaState, LogBase};

type ResidualFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type JacobianFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// A nonlinear least-squares problem `min |F(x) - b|`, `F: R^n -> R^m`.
///
/// Without an analytic Jacobian, central finite differences are used.
#[derive(Clone)]
pub struct Problem {
    m: usize,
    n: usize,
    f: Arc<ResidualFn>,
    jac: Option<Arc<JacobianFn>>,
    b: DVector<f64>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("m", &self.m)
            .field("n", &self.n)
            .field("analytic_jacobian", &self.jac.is_some())
            .field("b", &self.b)
            .finish()
    }
}

impl Problem {
    pub fn new<F>(m: usize, n: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Problem {
            m,
            n,
            f: Arc::new(f),
            jac: None,
            b: DVector::zeros(m),
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn with_data(mut self, b: DVector<f64>) -> Self {
        assert_eq!(b.len(), self.m, "data vector length must equal m");
        self.b = b;
        self
    }

    pub fn residual_dim(&self) -> usize {
        self.m
    }

    pub fn var_dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    /// `F(x)`
    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }

    /// `r(x) = F(x) - b`
    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        self.eval(x) - &self.b
    }

    pub fn residual_norm(&self, x: &DVector<f64>) -> f64 {
        self.residual(x).norm()
    }

    pub fn analytic_jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.jac.as_ref().map(|j| j(x))
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.jac {
            Some(j) => j(x),
            None => problems::fd_jacobian(self, x, problems::FD_STEP),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mngn")]
    Mngn,
    #[serde(rename = "mngn2-a")]
    Mngn2Alpha,
    #[serde(rename = "mngn2-ab")]
    Mngn2AlphaBeta,
    #[serde(rename = "mngn2-abd")]
    Mngn2AlphaBetaDelta,
    #[serde(rename = "ckb1")]
    Ckb1,
    #[serde(rename = "ckb2")]
    Ckb2,
    #[serde(rename = "rckb1")]
    RCkb1,
    #[serde(rename = "rckb2")]
    RCkb2,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Mngn,
        Method::Mngn2Alpha,
        Method::Mngn2AlphaBeta,
        Method::Mngn2AlphaBetaDelta,
        Method::Ckb1,
        Method::Ckb2,
        Method::RCkb1,
        Method::RCkb2,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Mngn => "mngn",
            Method::Mngn2Alpha => "mngn2-a",
            Method::Mngn2AlphaBeta => "mngn2-ab",
            Method::Mngn2AlphaBetaDelta => "mngn2-abd",
            Method::Ckb1 => "ckb1",
            Method::Ckb2 => "ckb2",
            Method::RCkb1 => "rckb1",
            Method::RCkb2 => "rckb2",
        }
    }

    /// Whether the Jacobian rank is re-estimated at every iteration; the
    /// other methods use `min(m, n)`.
    pub fn estimates_rank(self) -> bool {
        !matches!(self, Method::Mngn | Method::Ckb1 | Method::Ckb2)
    }

    /// Convex-combination baseline with its `gamma_k` sequence (1 or 2).
    pub fn ckb_variant(self) -> Option<u8> {
        match self {
            Method::Ckb1 | Method::RCkb1 => Some(1),
            Method::Ckb2 | Method::RCkb2 => Some(2),
            _ => None,
        }
    }

    pub fn delta_mode(self) -> Option<DeltaMode> {
        match self {
            Method::Mngn2AlphaBeta => Some(DeltaMode::Multiplicative),
            Method::Mngn2AlphaBetaDelta => Some(DeltaMode::Power),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.id() == s).ok_or_else(|| {
            let valid: Vec<&str> = Method::ALL.iter().map(|m| m.id()).collect();
            Error::invalid(format!("unknown method '{s}' (valid: {})", valid.join(", ")))
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub method: Method,
    pub stop_tol: f64,
    pub max_iter: usize,
    pub rank_params: RankParams,
    /// `xbar`; zero when absent.
    pub model_profile: Option<DVector<f64>>,
    /// `L` for the minimal-`L`-norm iteration.
    pub regularizer: Option<DMatrix<f64>>,
    /// `eta` for `mngn2-ab` (required there).
    pub fixed_eta: Option<f64>,
    /// Starting `eta` of the adaptive scheme.
    pub initial_eta: f64,
    pub k_res: usize,
    pub log_base: LogBase,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: Method::Mngn2AlphaBetaDelta,
            stop_tol: 1e-8,
            max_iter: 500,
            rank_params: RankParams::default(),
            model_profile: None,
            regularizer: None,
            fixed_eta: None,
            initial_eta: EtaState::DEFAULT_ETA,
            k_res: EtaState::DEFAULT_K_RES,
            log_base: LogBase::Ten,
        }
    }
}

impl SolveOptions {
    pub fn new(method: Method) -> Self {
        SolveOptions {
            method,
            ..Default::default()
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.fixed_eta = Some(eta);
        self
    }

    pub fn with_model_profile(mut self, xbar: DVector<f64>) -> Self {
        self.model_profile = Some(xbar);
        self
    }

    pub fn with_regularizer(mut self, l: DMatrix<f64>) -> Self {
        self.regularizer = Some(l);
        self
    }

    pub fn delta_mode(&self) -> Option<DeltaMode> {
        self.method.delta_mode()
    }

    /// Checks the options against a problem with `n` unknowns and returns the
    /// regularizer reduced to at most `n` rows.
    fn prepare(&self, n: usize) -> Result<Option<DMatrix<f64>>> {
        if !(self.stop_tol > 0.0) {
            return Err(Error::invalid("stop tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        self.rank_params.validate()?;
        if let Some(xbar) = &self.model_profile {
            if xbar.len() != n {
                return Err(Error::invalid(format!(
                    "model profile has length {}, expected {n}",
                    xbar.len()
                )));
            }
        }
        if self.method == Method::Mngn2AlphaBeta {
            match self.fixed_eta {
                Some(eta) if eta > 0.0 => {}
                _ => return Err(Error::invalid("mngn2-ab needs a positive fixed eta")),
            }
        }
        if !(self.initial_eta > 0.0) || self.k_res < 2 {
            return Err(Error::invalid("initial eta must be positive and k_res >= 2"));
        }
        match &self.regularizer {
            None => Ok(None),
            Some(l) => {
                if l.ncols() != n {
                    return Err(Error::invalid(format!(
                        "regularizer has {} columns, expected {n}",
                        l.ncols()
                    )));
                }
                Ok(Some(problems::compact_qr_reduce(l)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    MaxIter,
    LineSearchExhausted,
    Diverged,
    FactorizationError,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureReason::MaxIter => "max-iter",
            FailureReason::LineSearchExhausted => "line-search-exhausted",
            FailureReason::Diverged => "diverged",
            FailureReason::FactorizationError => "factorization-error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub rank: usize,
    /// `|r(x_{k+1})|`
    pub residual_norm: f64,
    /// `|x_{k+1} - xbar|`, or `|L (x_{k+1} - xbar)|` with a regularizer.
    pub solution_norm: f64,
    /// `|x_{k+1} - x_k|`
    pub step_norm: f64,
    pub line_search_exhausted: bool,
    pub projection_suppressed: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_final: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub failure_reason: Option<FailureReason>,
    pub failure_detail: Option<String>,
}

/// Step pieces produced from one factorization of the Jacobian.
#[derive(Debug, Clone)]
pub struct MinNormStep {
    pub s_tilde: DVector<f64>,
    pub t: DVector<f64>,
    pub basis: NullSpaceBasis,
}

/// Minimal-norm Gauss-Newton step and orthogonal null-space correction from
/// an existing SVD: `s_tilde = -sum_{i<rank} (u_i^T r / sigma_i) v_i`,
/// `t = V_2 V_2^T (x - xbar)`.
pub fn min_norm_step_from(
    svd: &SvdFactors,
    r: &DVector<f64>,
    x_minus_xbar: &DVector<f64>,
    rank: usize,
) -> Result<MinNormStep> {
    let (m, n) = svd.shape();
    if r.len() != m || x_minus_xbar.len() != n {
        return Err(Error::invalid("residual or iterate length does not match J"));
    }
    if rank > m.min(n) {
        return Err(Error::invalid(format!("rank {rank} exceeds min(m, n)")));
    }
    let mut s_tilde = DVector::zeros(n);
    for i in 0..rank {
        let sigma = svd.sigma[i];
        if sigma == 0.0 {
            return Err(Error::InconsistentRank { rank, index: i });
        }
        let g = svd.u.column(i).dot(r);
        s_tilde.axpy(-g / sigma, &svd.v.column(i), 1.0);
    }
    let basis = svd.null_space_basis(rank);
    let t = basis.project(x_minus_xbar)?;
    Ok(MinNormStep { s_tilde, t, basis })
}

pub fn min_norm_step(
    j: &DMatrix<f64>,
    r: &DVector<f64>,
    x: &DVector<f64>,
    xbar: &DVector<f64>,
    rank: usize,
) -> Result<MinNormStep> {
    let svd = linalg::svd(j)?;
    min_norm_step_from(&svd, r, &(x - xbar), rank)
}

/// Minimal-`L`-norm step from an existing GSVD of `(J, L)`:
/// `t = W_1 \hat W_1 (x - xbar)` and `s_tilde = W y` with `y` nonzero only on
/// the trailing `rank` columns.
pub fn min_l_norm_step_from(
    gsvd: &GsvdFactors,
    r: &DVector<f64>,
    x_minus_xbar: &DVector<f64>,
    rank: usize,
) -> Result<MinNormStep> {
    let lay = gsvd.layout;
    if r.len() != lay.m || x_minus_xbar.len() != lay.n {
        return Err(Error::invalid("residual or iterate length does not match J"));
    }
    if rank > lay.q || rank < lay.d {
        return Err(Error::invalid(format!(
            "rank {rank} outside [{}, {}] for this pair",
            lay.d, lay.q
        )));
    }
    let g = gsvd.u.tr_mul(r);
    let c = gsvd.c_full();
    let off = lay.offset();
    let first = lay.n - rank;
    let mut y_tail = DVector::zeros(rank);
    for idx in 0..rank {
        let col = first + idx;
        if c[col] == 0.0 {
            return Err(Error::InconsistentRank { rank, index: col });
        }
        y_tail[idx] = -g[col - off] / c[col];
    }
    let (t, s_tilde) = linalg::oblique_null_projection_and_step(gsvd, x_minus_xbar, &y_tail, rank)?;
    let basis = gsvd.null_space_basis(rank)?;
    Ok(MinNormStep { s_tilde, t, basis })
}

pub fn min_l_norm_step(
    j: &DMatrix<f64>,
    l: &DMatrix<f64>,
    r: &DVector<f64>,
    x: &DVector<f64>,
    xbar: &DVector<f64>,
    rank: usize,
) -> Result<MinNormStep> {
    let gsvd = linalg::gsvd(j, l)?;
    min_l_norm_step_from(&gsvd, r, &(x - xbar), rank)
}

/// `gamma_k` of the convex-combination baselines: `0.5^(k+1)` (variant 1) or
/// `0.5^(2^k)` (variant 2).
pub fn ckb_gamma(k: usize, variant: u8) -> f64 {
    match variant {
        1 => 0.5f64.powf(k as f64 + 1.0),
        _ => 0.5f64.powf(2f64.powf(k as f64)),
    }
}

/// Rearranged convex-combination update `x + s_tilde - gamma P x`, where
/// `px` is the null-space projection of `x`.
pub fn ckb_update(x: &DVector<f64>, s_tilde: &DVector<f64>, px: &DVector<f64>, gamma: f64) -> DVector<f64> {
    let mut out = x + s_tilde;
    out.axpy(-gamma, px, 1.0);
    out
}

/// `|x_next - x_prev| < tol |x_next|` or `|alpha s_tilde| < tol`.
pub fn check_convergence(x_prev: &DVector<f64>, x_next: &DVector<f64>, alpha_stilde_norm: f64, tol: f64) -> bool {
    (x_next - x_prev).norm() < tol * x_next.norm() || alpha_stilde_norm < tol
}

/// Everything computed during one iteration, handed to an observer.
#[derive(Debug)]
pub struct StepView<'a> {
    pub k: usize,
    pub x: &'a DVector<f64>,
    pub x_next: &'a DVector<f64>,
    pub xbar: &'a DVector<f64>,
    pub jacobian: &'a DMatrix<f64>,
    pub residual: &'a DVector<f64>,
    pub rank: usize,
    pub step: &'a MinNormStep,
    /// Direction the line search was run along.
    pub armijo_direction: &'a DVector<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub line_search_exhausted: bool,
    pub projection_suppressed: bool,
    pub converged: bool,
}

pub fn solve(problem: &Problem, x0: &DVector<f64>, options: &SolveOptions) -> Result<SolveResult> {
    solve_observed(problem, x0, options, |_| {})
}

/// Runs the selected method, calling `observer` after every iteration.
///
/// Returns `Err` only for invalid inputs; numerical breakdowns end the run
/// with a `failure_reason`.
pub fn solve_observed<O>(
    problem: &Problem,
    x0: &DVector<f64>,
    options: &SolveOptions,
    mut observer: O,
) -> Result<SolveResult>
where
    O: FnMut(&StepView<'_>),
{
    let (m, n) = (problem.residual_dim(), problem.var_dim());
    if x0.len() != n {
        return Err(Error::invalid(format!("x0 has length {}, expected {n}", x0.len())));
    }
    let reg = options.prepare(n)?;
    let method = options.method;
    let xbar = options.model_profile.clone().unwrap_or_else(|| DVector::zeros(n));
    let zero = DVector::zeros(n);
    let seminorm = |v: &DVector<f64>| match &reg {
        Some(l) => (l * v).norm(),
        None => v.norm(),
    };

    let mut beta_state = BetaState::default();
    let mut eta_state = EtaState::new(
        options.fixed_eta.unwrap_or(options.initial_eta),
        options.k_res,
        options.log_base,
    );
    let mut x = x0.clone();
    let mut trace = Vec::new();
    let mut last_exhausted = false;

    let fail = |x: DVector<f64>, trace: Vec<IterationRecord>, reason, detail: Option<String>| {
        Ok(SolveResult {
            x_final: x,
            converged: false,
            iterations: trace.len(),
            trace,
            failure_reason: Some(reason),
            failure_detail: detail,
        })
    };

    for k in 0..options.max_iter {
        let r = problem.residual(&x);
        let jac = problem.jacobian(&x);
        if !r.iter().all(|v| v.is_finite()) || !jac.iter().all(|v| v.is_finite()) {
            return fail(x, trace, FailureReason::Diverged, None);
        }
        let r_norm_sq = r.norm_squared();

        // CKB projects x itself rather than x - xbar
        let origin = if method.ckb_variant().is_some() { &zero } else { &xbar };
        let centered = &x - origin;
        let step = match &reg {
            None => linalg::svd(&jac).and_then(|f| {
                let rank = if method.estimates_rank() {
                    rank::estimate_rank_svd(f.sigma.as_slice(), &options.rank_params)?
                } else {
                    m.min(n)
                };
                min_norm_step_from(&f, &r, &centered, rank).map(|s| (s, rank))
            }),
            Some(l) => linalg::gsvd(&jac, l).and_then(|f| {
                let rank = if method.estimates_rank() {
                    rank::estimate_rank_gsvd(f.c.as_slice(), f.layout.d, &options.rank_params)?
                } else {
                    f.layout.q
                };
                min_l_norm_step_from(&f, &r, &centered, rank).map(|s| (s, rank))
            }),
        };
        let (step, rank) = match step {
            Ok(v) => v,
            Err(e) => return fail(x, trace, FailureReason::FactorizationError, Some(e.to_string())),
        };
        let js_norm_sq = (&jac * &step.s_tilde).norm_squared();
        let res_at = |y: &DVector<f64>| problem.residual_norm(y);

        let mut exhausted = false;
        let mut suppressed = false;
        let alpha;
        let beta;
        let x_next;
        let armijo_direction;
        match method {
            Method::Ckb1 | Method::Ckb2 | Method::RCkb1 | Method::RCkb2 => {
                let gamma = ckb_gamma(k, method.ckb_variant().unwrap_or(1));
                alpha = 1.0;
                beta = gamma;
                x_next = ckb_update(&x, &step.s_tilde, &step.t, gamma);
                armijo_direction = step.s_tilde.clone();
            }
            Method::Mngn => {
                let ls = relaxation::armijo_goldstein(res_at, &x, &step.s_tilde, js_norm_sq, r_norm_sq);
                exhausted = ls.exhausted;
                alpha = ls.alpha;
                beta = 1.0;
                x_next = &x + alpha * &step.s_tilde - &step.t;
                armijo_direction = step.s_tilde.clone();
            }
            Method::Mngn2Alpha => {
                // The corrected direction replaces s_tilde in both sides of the test.
                let dir = &step.s_tilde - &step.t;
                let jd_norm_sq = (&jac * &dir).norm_squared();
                let ls = relaxation::armijo_goldstein(res_at, &x, &dir, jd_norm_sq, r_norm_sq);
                exhausted = ls.exhausted;
                alpha = ls.alpha;
                beta = alpha;
                x_next = &x + alpha * &dir;
                armijo_direction = dir;
            }
            Method::Mngn2AlphaBeta | Method::Mngn2AlphaBetaDelta => {
                let ls = relaxation::armijo_goldstein(res_at, &x, &step.s_tilde, js_norm_sq, r_norm_sq);
                exhausted = ls.exhausted;
                alpha = ls.alpha;
                let x_tilde = &x + alpha * &step.s_tilde;
                let rho_tilde = problem.residual_norm(&x_tilde);
                let mode = method.delta_mode().unwrap_or(DeltaMode::Power);
                if mode == DeltaMode::Power {
                    eta_state.push(rho_tilde);
                    eta_state.update();
                }
                let eta = eta_state.eta;
                let out = relaxation::select_beta(&mut beta_state, &x_tilde, rho_tilde, &step.t, res_at, |rho| {
                    relaxation::residual_increase(rho, eta, mode)
                });
                suppressed = out.suppressed;
                beta = out.beta;
                x_next = out.x_next;
                armijo_direction = step.s_tilde.clone();
            }
        }
        last_exhausted = exhausted;

        let alpha_stilde_norm = alpha * step.s_tilde.norm();
        let converged = check_convergence(&x, &x_next, alpha_stilde_norm, options.stop_tol);
        let eta = match method.delta_mode() {
            Some(_) => eta_state.eta,
            None => f64::NAN,
        };
        let record = IterationRecord {
            k,
            alpha,
            beta,
            eta,
            rank,
            residual_norm: problem.residual_norm(&x_next),
            solution_norm: seminorm(&(&x_next - &xbar)),
            step_norm: (&x_next - &x).norm(),
            line_search_exhausted: exhausted,
            projection_suppressed: suppressed,
        };
        observer(&StepView {
            k,
            x: &x,
            x_next: &x_next,
            xbar: &xbar,
            jacobian: &jac,
            residual: &r,
            rank,
            step: &step,
            armijo_direction: &armijo_direction,
            alpha,
            beta,
            eta,
            line_search_exhausted: exhausted,
            projection_suppressed: suppressed,
            converged,
        });
        trace.push(record);
        x = x_next;
        if !x.iter().all(|v| v.is_finite()) {
            return fail(x, trace, FailureReason::Diverged, None);
        }
        if converged {
            return Ok(SolveResult {
                x_final: x,
                converged: true,
                iterations: trace.len(),
                trace,
                failure_reason: None,
                failure_detail: None,
            });
        }
    }
    let reason = if last_exhausted {
        FailureReason::LineSearchExhausted
    } else {
        FailureReason::MaxIter
    };
    fail(x, trace, reason, None)
}
