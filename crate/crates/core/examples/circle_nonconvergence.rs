//! The plain minimal-norm Gauss-Newton step can cycle forever on a circle
//! that does not contain the origin; relaxing the null-space correction fixes
//! it.
//!
//! cargo run --example circle_nonconvergence

use mngn2::problems::{ProblemConfig, ProblemKind};
use mngn2::solver::{solve, Method, SolveOptions};
use nalgebra::DVector;

fn main() -> mngn2::Result<()> {
    let tp = ProblemConfig::new(ProblemKind::Circle2d).build()?;
    let x0 = DVector::from_vec(vec![0.5, 3.0]);
    for method in [Method::Mngn, Method::Mngn2Alpha, Method::Mngn2AlphaBetaDelta] {
        let res = solve(&tp.problem, &x0, &SolveOptions::new(method))?;
        let tail: Vec<String> = res
            .trace
            .iter()
            .rev()
            .take(4)
            .map(|r| format!("{:.4}", r.solution_norm))
            .collect();
        println!(
            "{:<10} converged={:<5} iterations={:<4} last |x|: {}",
            method.id(),
            res.converged,
            res.iterations,
            tail.join(" ")
        );
    }
    let best = tp.known_norm.unwrap();
    println!("nearest point of the circle to the origin has |x| = {best:.4}");
    Ok(())
}
