//! Rank estimation from singular value gaps.
//!
//! Near the solution set of the ellipsoid-product problem the Jacobian is
//! numerically rank one. A method that assumes full rank takes a huge step
//! along the tiny singular directions; the estimated rank avoids that.
//!
//! cargo run --example rank_estimation

use mngn2::linalg;
use mngn2::problems::{ProblemConfig, ProblemKind, VectorSpec};
use mngn2::rank::{estimate_rank_svd, RankParams};
use mngn2::solver::{min_norm_step, solve, Method, SolveOptions};
use nalgebra::DVector;

fn main() -> mngn2::Result<()> {
    let params = RankParams::default();
    let planted = [9.0, 4.0, 2.5, 1e-3, 4e-4, 1e-12];
    println!("spectrum {planted:?} -> rank {}", estimate_rank_svd(&planted, &params)?);

    let tp = ProblemConfig::new(ProblemKind::EllipsoidProduct)
        .with_c(VectorSpec::FirstOnly(2.0))
        .build()?;
    let n = tp.problem.var_dim();
    // a point just off the unit sphere around (2, 0, ..., 0)
    let mut x = DVector::from_element(n, 0.05);
    x[0] = 1.01;
    let j = tp.problem.jacobian(&x);
    let sigma = linalg::singular_values(&j)?;
    let rank = estimate_rank_svd(sigma.as_slice(), &params)?;
    let shown: Vec<String> = sigma.iter().map(|s| format!("{s:.2e}")).collect();
    println!("sigma(J) = [{}]", shown.join(", "));
    println!("estimated rank {rank} of {}", sigma.len());

    let r = tp.problem.residual(&x);
    let zero = DVector::zeros(n);
    for k in [rank, sigma.len()] {
        let step = min_norm_step(&j, &r, &x, &zero, k)?;
        println!("rank {k}: |s| = {:.3e}", step.s_tilde.norm());
    }

    let x0 = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.5 } else { -0.5 });
    for method in [Method::Ckb2, Method::RCkb2, Method::Mngn2AlphaBetaDelta] {
        let res = solve(&tp.problem, &x0, &SolveOptions::new(method))?;
        println!(
            "{:<10} converged={:<5} iterations={:<4} |x| = {:.4}",
            method.id(),
            res.converged,
            res.iterations,
            res.x_final.norm()
        );
    }
    Ok(())
}
