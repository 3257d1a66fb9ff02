//! Minimal-norm point of an elliptic paraboloid, watching each iteration.
//!
//! cargo run --example solve_paraboloid

use mngn2::problems::{ProblemConfig, ProblemKind};
use mngn2::solver::{solve_observed, Method, SolveOptions};
use nalgebra::DVector;

fn main() -> mngn2::Result<()> {
    let tp = ProblemConfig::new(ProblemKind::Paraboloid).build()?;
    let x0 = DVector::from_vec(vec![0.0, 3.0, 3.0]);
    let opts = SolveOptions::new(Method::Mngn2AlphaBetaDelta);

    println!(
        "{:>3} {:>10} {:>10} {:>8} {:>12} {:>9}",
        "k", "alpha", "beta", "eta", "|r|", "|x|"
    );
    let res = solve_observed(&tp.problem, &x0, &opts, |v| {
        if v.k % 5 == 0 || v.converged {
            println!(
                "{:>3} {:>10.3e} {:>10.3e} {:>8.4} {:>12.4e} {:>9.6}",
                v.k,
                v.alpha,
                v.beta,
                v.eta,
                v.residual.norm(),
                v.x_next.norm()
            );
        }
    })?;

    let known = tp.known_solution.expect("the paraboloid has a closed-form optimum");
    println!("converged: {} after {} iterations", res.converged, res.iterations);
    println!("x      = {:.6?}", res.x_final.as_slice());
    println!("x_dag  = {:.6?}", known.as_slice());
    println!("|x| - |x_dag| = {:.2e}", res.x_final.norm() - known.norm());
    Ok(())
}
