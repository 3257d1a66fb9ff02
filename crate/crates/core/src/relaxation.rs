//! Step-length controllers: Armijo-Goldstein damping of the Gauss-Newton step
//! and the accept/halve/double loop for the projection step, with its
//! adaptive residual-increase tolerance.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Machine epsilon added to the Gauss-Newton residual before computing the
/// tolerated increase.
pub const EPS_M: f64 = f64::EPSILON;

/// Largest `i` tried in the sequence `alpha = 2^-i`.
pub const ARMIJO_MAX_HALVINGS: i32 = 30;

/// The projection step length is never halved to or below this value.
pub const BETA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoOutcome {
    pub alpha: f64,
    /// `i` in `alpha = 2^-i`.
    pub halvings: i32,
    /// No `i <= 30` satisfied the sufficient-decrease test.
    pub exhausted: bool,
}

/// Largest `alpha = 2^-i`, `i = 0..=30`, with
/// `|r|^2 - |r(x + alpha s)|^2 >= alpha |J s|^2 / 2`.
pub fn armijo_goldstein<F>(
    mut residual_norm_at: F,
    x: &DVector<f64>,
    s: &DVector<f64>,
    js_norm_sq: f64,
    r_norm_sq: f64,
) -> ArmijoOutcome
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let mut trial = x.clone();
    for i in 0..=ARMIJO_MAX_HALVINGS {
        let alpha = 0.5f64.powi(i);
        trial.copy_from(x);
        trial.axpy(alpha, s, 1.0);
        let rn = residual_norm_at(&trial);
        if r_norm_sq - rn * rn >= 0.5 * alpha * js_norm_sq {
            return ArmijoOutcome {
                alpha,
                halvings: i,
                exhausted: false,
            };
        }
    }
    ArmijoOutcome {
        alpha: 0.5f64.powi(ARMIJO_MAX_HALVINGS),
        halvings: ARMIJO_MAX_HALVINGS,
        exhausted: true,
    }
}

/// How much the residual may grow when the projection correction is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaMode {
    /// `delta = eta * rho`
    Multiplicative,
    /// `delta = rho^eta`
    Power,
}

pub fn residual_increase(rho: f64, eta: f64, mode: DeltaMode) -> f64 {
    match mode {
        DeltaMode::Multiplicative => eta * rho,
        DeltaMode::Power => rho.powf(eta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogBase {
    Natural,
    #[default]
    Ten,
}

impl LogBase {
    fn log(self, v: f64) -> f64 {
        match self {
            LogBase::Natural => v.ln(),
            LogBase::Ten => v.log10(),
        }
    }
}

/// Adaptive exponent `eta` driven by the slope of a least-squares line
/// through the logarithms of the last `k_res` Gauss-Newton residuals.
#[derive(Debug, Clone)]
pub struct EtaState {
    pub eta: f64,
    history: VecDeque<f64>,
    k_res: usize,
    pub slope_min: f64,
    pub slope_max: f64,
    pub log_base: LogBase,
    // inverse of the 2x2 normal matrix for abscissae 1..=k_res
    normal_inv: [[f64; 2]; 2],
    pub last_slope: Option<f64>,
}

impl EtaState {
    pub const DEFAULT_ETA: f64 = 0.125;
    pub const DEFAULT_K_RES: usize = 5;

    pub fn new(eta: f64, k_res: usize, log_base: LogBase) -> Self {
        assert!(eta > 0.0, "eta must be positive");
        assert!(k_res >= 2, "the regression needs at least two residuals");
        let k = k_res as f64;
        let sj: f64 = (1..=k_res).map(|j| j as f64).sum();
        let sjj: f64 = (1..=k_res).map(|j| (j * j) as f64).sum();
        // [[sjj, sj], [sj, k]] [M, N]^T = [sum j y, sum y]^T
        let det = sjj * k - sj * sj;
        let normal_inv = [[k / det, -sj / det], [-sj / det, sjj / det]];
        EtaState {
            eta,
            history: VecDeque::with_capacity(k_res),
            k_res,
            slope_min: -1e-2,
            slope_max: -0.5,
            log_base,
            normal_inv,
            last_slope: None,
        }
    }

    pub fn k_res(&self) -> usize {
        self.k_res
    }

    pub fn history(&self) -> impl Iterator<Item = &f64> {
        self.history.iter()
    }

    /// Appends a residual norm, dropping the oldest beyond `k_res`.
    pub fn push(&mut self, theta: f64) {
        if self.history.len() == self.k_res {
            self.history.pop_front();
        }
        self.history.push_back(theta);
    }

    /// Slope `M` of the regression line through `(j, log theta_j)`, or `None`
    /// while fewer than `k_res` residuals are known. Zero residuals are
    /// replaced by `EPS_M` before the logarithm.
    pub fn regression_slope(&self) -> Option<f64> {
        if self.history.len() < self.k_res {
            return None;
        }
        let (mut sy, mut sjy) = (0.0, 0.0);
        for (idx, &theta) in self.history.iter().enumerate() {
            let y = self.log_base.log(if theta > 0.0 { theta } else { EPS_M });
            sy += y;
            sjy += (idx + 1) as f64 * y;
        }
        let inv = &self.normal_inv;
        Some(inv[0][0] * sjy + inv[0][1] * sy)
    }

    /// Doubles `eta` when the residual stagnates (`M > slope_min`) and halves
    /// it when the decrease is fast (`M < slope_max`).
    pub fn update(&mut self) -> f64 {
        self.last_slope = self.regression_slope();
        if let Some(m) = self.last_slope {
            if m > self.slope_min {
                self.eta *= 2.0;
            } else if m < self.slope_max {
                self.eta /= 2.0;
            }
        }
        self.eta
    }
}

/// Projection step length, always a power of two in `(BETA_FLOOR, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaState {
    pub beta: f64,
}

impl Default for BetaState {
    fn default() -> Self {
        BetaState { beta: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct BetaOutcome {
    pub beta: f64,
    pub x_next: DVector<f64>,
    pub rho_next: f64,
    /// `|r(x_tilde)| + EPS_M`
    pub rho_tilde: f64,
    /// Residual bound the accepted point was tested against.
    pub bound: f64,
    /// `beta` hit the floor without satisfying the bound.
    pub suppressed: bool,
}

/// Chooses `beta` for `x_next = x_tilde - beta t`.
///
/// `beta` is first doubled if it is below one, then halved until
/// `|r(x_next)| <= rho + delta(rho)` with `rho = |r(x_tilde)| + EPS_M`, or
/// until a further halving would reach `BETA_FLOOR`.
pub fn select_beta<F, D>(
    state: &mut BetaState,
    x_tilde: &DVector<f64>,
    rho_tilde_raw: f64,
    t: &DVector<f64>,
    mut residual_norm_at: F,
    delta: D,
) -> BetaOutcome
where
    F: FnMut(&DVector<f64>) -> f64,
    D: Fn(f64) -> f64,
{
    if state.beta < 1.0 {
        state.beta *= 2.0;
    }
    let rho_tilde = rho_tilde_raw + EPS_M;
    let bound = rho_tilde + delta(rho_tilde);
    let mut x_next = x_tilde - state.beta * t;
    let mut rho = residual_norm_at(&x_next);
    // NaN residuals count as violations
    while !(rho <= bound) && state.beta / 2.0 > BETA_FLOOR {
        state.beta /= 2.0;
        x_next.copy_from(x_tilde);
        x_next.axpy(-state.beta, t, 1.0);
        rho = residual_norm_at(&x_next);
    }
    BetaOutcome {
        beta: state.beta,
        suppressed: !(rho <= bound),
        x_next,
        rho_next: rho,
        rho_tilde,
        bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn armijo_accepts_full_step_on_affine_residual() {
        // r(x) = A x - b with s the exact Gauss-Newton step
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = DVector::from_vec(vec![0.3, -0.7]);
        let r = &a * &x - &b;
        let s = -a.clone().lu().solve(&r).unwrap();
        let js = (&a * &s).norm_squared();
        let out = armijo_goldstein(|y| (&a * y - &b).norm(), &x, &s, js, r.norm_squared());
        assert_eq!(out.alpha, 1.0);
        assert!(!out.exhausted);
    }

    #[test]
    fn armijo_converged_case() {
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let out = armijo_goldstein(|_| 0.0, &x, &DVector::zeros(2), 0.0, 0.0);
        assert_eq!(out.alpha, 1.0);
    }

    #[test]
    fn armijo_exhaustion() {
        let x = DVector::from_vec(vec![0.0]);
        let s = DVector::from_vec(vec![1.0]);
        let out = armijo_goldstein(|_| 10.0, &x, &s, 1.0, 1.0);
        assert!(out.exhausted);
        assert_eq!(out.alpha, 0.5f64.powi(30));
    }

    #[test]
    fn residual_increase_modes() {
        assert_eq!(residual_increase(0.5, 2.0, DeltaMode::Multiplicative), 1.0);
        assert_eq!(residual_increase(1.0, 0.125, DeltaMode::Power), 1.0);
        assert!((residual_increase(1e-8, 0.25, DeltaMode::Power) - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn eta_doubles_on_flat_history() {
        let mut st = EtaState::new(0.125, 5, LogBase::Natural);
        for _ in 0..5 {
            st.push(1.0);
        }
        assert_eq!(st.update(), 0.25);
        assert_eq!(st.last_slope, Some(0.0));
    }

    #[test]
    fn eta_halves_on_steep_decay() {
        let mut st = EtaState::new(0.125, 5, LogBase::Natural);
        for j in 1..=5 {
            st.push(10f64.powi(-j));
        }
        let m = st.regression_slope().unwrap();
        assert!((m + std::f64::consts::LN_10).abs() < 1e-12);
        assert_eq!(st.update(), 0.0625);
    }

    #[test]
    fn eta_unchanged_before_history_fills() {
        let mut st = EtaState::new(0.125, 5, LogBase::Natural);
        for _ in 0..4 {
            st.push(1.0);
            assert_eq!(st.update(), 0.125);
        }
    }

    #[test]
    fn eta_slope_matches_closed_form() {
        let theta = [1.0, 0.9, 0.85, 0.8, 0.78];
        let logs: Vec<f64> = theta.iter().map(|t: &f64| t.ln()).collect();
        let mean = logs.iter().sum::<f64>() / 5.0;
        let num: f64 = logs
            .iter()
            .enumerate()
            .map(|(i, y)| (i as f64 - 2.0) * (y - mean))
            .sum();
        let den: f64 = (0..5).map(|i| (i as f64 - 2.0).powi(2)).sum();
        let mut st = EtaState::new(0.125, 5, LogBase::Natural);
        for t in theta {
            st.push(t);
        }
        assert!((st.regression_slope().unwrap() - num / den).abs() < 1e-14);
    }

    #[test]
    fn eta_zero_residual_uses_eps() {
        let mut st = EtaState::new(0.125, 5, LogBase::Natural);
        for _ in 0..5 {
            st.push(0.0);
        }
        assert_eq!(st.regression_slope(), Some(0.0));
    }

    #[test]
    fn beta_zero_correction_accepts_immediately() {
        let mut st = BetaState::default();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let out = select_beta(&mut st, &x, 0.3, &DVector::zeros(2), |_| 0.3, |r| r);
        assert_eq!(out.beta, 1.0);
        assert_eq!(out.x_next, x);
        assert!(!out.suppressed);
    }

    #[test]
    fn beta_doubles_before_testing() {
        let mut st = BetaState { beta: 0.25 };
        let x = DVector::from_vec(vec![0.0]);
        let t = DVector::from_vec(vec![1.0]);
        let out = select_beta(&mut st, &x, 1.0, &t, |_| 1.0, |r| r);
        assert_eq!(out.beta, 0.5);
    }

    #[test]
    fn beta_halves_until_accepted() {
        let mut st = BetaState::default();
        let x = DVector::from_vec(vec![0.0]);
        let t = DVector::from_vec(vec![1.0]);
        // residual grows linearly with the correction
        let out = select_beta(&mut st, &x, 1.0, &t, |y| 1.0 + y[0].abs(), |_| 0.1);
        assert_eq!(out.beta, 0.0625);
        assert!(out.rho_next <= out.bound);
    }

    #[test]
    fn beta_floor_flags_suppression() {
        let mut st = BetaState::default();
        let x = DVector::from_vec(vec![0.0]);
        let t = DVector::from_vec(vec![1.0]);
        let out = select_beta(&mut st, &x, 1.0, &t, |_| 5.0, |_| 0.1);
        assert!(out.suppressed);
        assert!(out.beta > BETA_FLOOR && out.beta / 2.0 <= BETA_FLOOR);
        assert_eq!(out.beta, 0.5f64.powi(26));
    }
}
