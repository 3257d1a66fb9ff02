//! Invariant checks shared by the property suite and the acceptance target.
//! Each check returns `Err` with a description of the first violation.
#![allow(dead_code)]

use mngn2::linalg::{self, GsvdFactors};
use mngn2::problems::{self, ProblemConfig, ProblemKind, VectorSpec};
use mngn2::rank::{self, RankParams};
use mngn2::relaxation::BETA_FLOOR;
use mngn2::solver::{self, Method, Problem, SolveOptions, StepView};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Random `m x n` matrix of exact rank `r`.
pub fn random_rank_deficient(rng: &mut ChaCha8Rng, m: usize, n: usize, r: usize) -> DMatrix<f64> {
    random_matrix(rng, m, r) * random_matrix(rng, r, n)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn orth_err(q: &DMatrix<f64>) -> f64 {
    (q.transpose() * q - DMatrix::identity(q.ncols(), q.ncols())).norm()
}

pub fn svd_reconstruction(a: &DMatrix<f64>) -> Check {
    let f = linalg::svd(a).map_err(|e| e.to_string())?;
    let err = (f.reconstruct() - a).norm();
    let tol = 1e-12 * (1.0 + a.norm());
    ensure(err <= tol, || format!("|U S V^T - A| = {err:.3e} > {tol:.3e}"))?;
    ensure(orth_err(&f.u) <= 1e-12 * a.nrows() as f64, || "U not orthogonal".into())?;
    ensure(orth_err(&f.v) <= 1e-12 * a.ncols() as f64, || "V not orthogonal".into())?;
    let sorted = f.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]);
    ensure(sorted, || "singular values not sorted".into())
}

pub fn gsvd_checks(j: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<GsvdFactors, String> {
    let g = linalg::gsvd(j, l).map_err(|e| e.to_string())?;
    let ej = (&g.u * g.sigma_j() * &g.winv - j).norm() / j.norm().max(1.0);
    let el = (&g.v * g.sigma_l() * &g.winv - l).norm() / l.norm().max(1.0);
    ensure(ej <= 1e-10, || format!("J identity off by {ej:.3e}"))?;
    ensure(el <= 1e-10, || format!("L identity off by {el:.3e}"))?;
    for (c, s) in g.c.iter().zip(g.s.iter()) {
        let e = (c * c + s * s - 1.0).abs();
        ensure(e <= 1e-12, || format!("c^2 + s^2 - 1 = {e:.3e}"))?;
    }
    // Ties among numerically zero cosines may be ordered at rounding level.
    let slack = 1e-12;
    ensure(g.c.as_slice().windows(2).all(|w| w[0] <= w[1] + slack), || {
        "c not nondecreasing".into()
    })?;
    ensure(g.s.as_slice().windows(2).all(|w| w[0] + slack >= w[1]), || {
        "s not nonincreasing".into()
    })?;
    Ok(g)
}

/// Orthogonal null-space projector of a rank-`r` matrix: idempotent,
/// symmetric, and annihilated by `A`.
pub fn orthogonal_projector(a: &DMatrix<f64>, r: usize) -> Check {
    let f = linalg::svd(a).map_err(|e| e.to_string())?;
    let basis = f.null_space_basis(r);
    let p = &basis.columns * basis.columns.transpose();
    let idem = (&p * &p - &p).norm();
    let sym = (&p - p.transpose()).norm();
    ensure(idem <= 1e-12 * a.ncols() as f64, || format!("|P^2 - P| = {idem:.3e}"))?;
    ensure(sym <= 1e-12, || format!("|P - P^T| = {sym:.3e}"))?;
    let ann = basis.annihilation_residual(a);
    ensure(ann <= 1e-10 * a.norm(), || format!("|A V_2| = {ann:.3e}"))
}

/// Oblique projector `W_1 \hat W_1` from the GSVD of a pair where `J` has
/// exact rank `r`.
pub fn oblique_projector(j: &DMatrix<f64>, l: &DMatrix<f64>, r: usize) -> Check {
    let g = gsvd_checks(j, l)?;
    let basis = g.null_space_basis(r).map_err(|e| e.to_string())?;
    let rows = basis.rows.as_ref().ok_or("missing row factor")?;
    let p = &basis.columns * rows;
    let scale = p.norm().max(1.0);
    let idem = (&p * &p - &p).norm() / scale;
    ensure(idem <= 1e-10, || format!("|P^2 - P| = {idem:.3e}"))?;
    let jp = (j * &p).norm() / scale;
    ensure(jp <= 1e-10 * j.norm(), || format!("|J P| = {jp:.3e}"))?;
    let ann = basis.annihilation_residual(j);
    ensure(ann <= 1e-10 * j.norm() * basis.columns.norm().max(1.0), || {
        format!("|J W_1| = {ann:.3e}")
    })
}

/// Spectrum with `lead` values in `[1, 10]` followed by values at most
/// `1 / (2R)` times the smallest of them.
pub fn planted_gap(rng: &mut ChaCha8Rng, q: usize, lead: usize, r: f64) -> Vec<f64> {
    let mut head: Vec<f64> = (0..lead).map(|_| rng.random_range(1.0..10.0)).collect();
    head.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = head[lead - 1] / (2.0 * r);
    // A narrow tail band keeps every ratio inside the tail far below `r`.
    let mut tail: Vec<f64> = (lead..q).map(|_| rng.random_range(0.5..1.0) * top).collect();
    tail.sort_by(|a, b| b.partial_cmp(a).unwrap());
    head.extend(tail);
    head
}

pub fn planted_gap_recovery(rng: &mut ChaCha8Rng, q: usize) -> Check {
    let params = RankParams::default();
    for lead in 1..q {
        let sigma = planted_gap(rng, q, lead, params.gap_ratio);
        let got = rank::estimate_rank_svd(&sigma, &params).map_err(|e| e.to_string())?;
        ensure(got == lead, || {
            format!("planted rank {lead}, estimated {got} from {sigma:?}")
        })?;
        let mut c = sigma.clone();
        c.reverse();
        let got = rank::estimate_rank_gsvd(&c, 0, &params).map_err(|e| e.to_string())?;
        ensure(got == lead, || format!("planted c-block rank {lead}, estimated {got}"))?;
    }
    Ok(())
}

/// Convex-combination form against the rearranged update used by the solver.
pub fn ckb_forms_agree(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize, variant: u8) -> Check {
    let j = random_matrix(rng, m, n);
    let f = linalg::svd(&j).map_err(|e| e.to_string())?;
    let x = random_vector(rng, n) * 5.0;
    let r = random_vector(rng, m);
    let step = solver::min_norm_step_from(&f, &r, &x, m.min(n)).map_err(|e| e.to_string())?;
    let gamma = solver::ckb_gamma(k, variant);
    let v2 = &step.basis.columns;
    let gn = &x + &step.s_tilde;
    let camp = (1.0 - gamma) * &gn + gamma * (&gn - v2 * v2.tr_mul(&x));
    let ckb = solver::ckb_update(&x, &step.s_tilde, &step.t, gamma);
    let err = (&camp - &ckb).norm() / camp.norm().max(1.0);
    ensure(err <= 1e-12, || format!("forms differ by {err:.3e}"))
}

fn is_power_of_half(v: f64, max_exp: i32) -> bool {
    (0..=max_exp).any(|i| v == 0.5f64.powi(i))
}

/// Per-iteration invariants of a solve, accumulated by an observer.
#[derive(Debug, Default)]
pub struct IterationAudit {
    pub iterations: usize,
    pub beta_one: usize,
    pub violations: Vec<String>,
}

impl IterationAudit {
    fn fail(&mut self, k: usize, msg: String) {
        if self.violations.len() < 10 {
            self.violations.push(format!("k={k}: {msg}"));
        }
    }

    pub fn observe(&mut self, problem: &Problem, method: Method, l: Option<&DMatrix<f64>>, v: &StepView<'_>) {
        self.iterations += 1;
        let k = v.k;
        let is_ckb = method.ckb_variant().is_some();

        if !is_ckb {
            if !is_power_of_half(v.alpha, 30) {
                self.fail(k, format!("alpha {} is not 2^-i", v.alpha));
            }
            if !v.line_search_exhausted {
                let r2 = v.residual.norm_squared();
                let trial = v.x + v.alpha * v.armijo_direction;
                let rn = problem.residual_norm(&trial);
                let js = (v.jacobian * v.armijo_direction).norm_squared();
                if r2 - rn * rn < 0.5 * v.alpha * js {
                    self.fail(
                        k,
                        format!(
                            "sufficient decrease violated: r2={r2:e} rn2={:e} js={js:e} alpha={}",
                            rn * rn,
                            v.alpha
                        ),
                    );
                }
                if rn > v.residual.norm() {
                    self.fail(k, "residual grew at the Gauss-Newton point".into());
                }
            }
            let beta_loop = method.delta_mode().is_some();
            if beta_loop && !(is_power_of_half(v.beta, 40) && v.beta > BETA_FLOOR && v.beta <= 1.0) {
                self.fail(k, format!("beta {} outside 2^-j in (1e-8, 1]", v.beta));
            }
        }

        // t must not change the linearized residual of the truncated model.
        let jr = match truncated_jacobian(v.jacobian, l, v.rank) {
            Ok(j) => j,
            Err(e) => return self.fail(k, e),
        };
        let t = &v.step.t;
        let lin = (&jr * t).norm();
        if lin > 1e-10 * jr.norm().max(1.0) * t.norm().max(1.0) {
            self.fail(k, format!("|J_r t| = {lin:.3e}"));
        }

        if !is_ckb && v.beta == 1.0 && !v.projection_suppressed {
            self.beta_one += 1;
            let d = v.x_next - v.xbar;
            let coords = v.step.basis.coordinates(&d).norm();
            let tol = if v.step.basis.is_orthonormal() { 1e-9 } else { 1e-8 };
            if coords > tol * (1.0 + d.norm()) {
                self.fail(k, format!("beta = 1 iterate keeps null-space component {coords:.3e}"));
            }
        }
    }
}

/// `J` with everything outside the leading `rank` (generalized) singular
/// triplets removed.
pub fn truncated_jacobian(j: &DMatrix<f64>, l: Option<&DMatrix<f64>>, rank: usize) -> Result<DMatrix<f64>, String> {
    match l {
        None => {
            let mut f = linalg::svd(j).map_err(|e| e.to_string())?;
            for i in rank..f.sigma.len() {
                f.sigma[i] = 0.0;
            }
            Ok(f.reconstruct())
        }
        Some(l) => {
            let g = linalg::gsvd(j, l).map_err(|e| e.to_string())?;
            let n = g.layout.n;
            let mut sj = g.sigma_j();
            for col in 0..n - rank {
                sj.column_mut(col).fill(0.0);
            }
            Ok(&g.u * sj * &g.winv)
        }
    }
}

/// Runs one solve while auditing every iteration.
pub fn audited_solve(problem: &Problem, x0: &DVector<f64>, opts: &SolveOptions) -> IterationAudit {
    let mut audit = IterationAudit::default();
    let l = opts.regularizer.clone();
    let res = solver::solve_observed(problem, x0, opts, |v| {
        audit.observe(problem, opts.method, l.as_ref(), v)
    });
    match res {
        Ok(r) => {
            if r.iterations != r.trace.len() {
                audit
                    .violations
                    .push("trace length differs from iteration count".into());
            }
        }
        Err(e) => audit.violations.push(e.to_string()),
    }
    audit
}

/// Every built-in problem in the configurations the benchmarks use, plus
/// square and non-default variants.
pub fn builtin_configs() -> Vec<ProblemConfig> {
    use ProblemKind::*;
    let mut out = vec![
        ProblemConfig::new(Robot),
        ProblemConfig::new(Paraboloid),
        ProblemConfig::new(Circle2d),
    ];
    for kind in [EllipsoidProduct, SpherePlanes, Chain] {
        out.push(ProblemConfig::new(kind));
        out.push(ProblemConfig::new(kind).with_c(VectorSpec::FirstOnly(2.0)));
        out.push(ProblemConfig::sized(kind, 6, 6));
        out.push(ProblemConfig::sized(kind, 4, 7).with_a(VectorSpec::List(vec![1.0, 2.0, 0.5, 1.5, 3.0, 1.0, 0.7])));
    }
    out
}

pub fn fd_jacobians_agree(points: usize, seed: u64) -> Check {
    for cfg in builtin_configs() {
        let tp = cfg.build().map_err(|e| e.to_string())?;
        for o in problems::check_problem(&tp, points, seed) {
            if o.name == "jacobian" && !o.passed {
                return Err(format!("{}: {}", tp.name, o.detail));
            }
        }
    }
    Ok(())
}
