//! Defining a problem from closures, with and without an analytic Jacobian,
//! and steering the solution toward a model profile.
//!
//! cargo run --example custom_problem

use mngn2::problems::jacobian_mismatch;
use mngn2::solver::{solve, Method, Problem, SolveOptions};
use nalgebra::{DMatrix, DVector};

fn main() -> mngn2::Result<()> {
    // Two equations in four unknowns: a circle in (x1, x2) and a line tying
    // x3 to x4. Every solution has a two-dimensional family of neighbours.
    let f = |x: &DVector<f64>| DVector::from_vec(vec![x[0] * x[0] + x[1] * x[1] - 4.0, x[2] - 2.0 * x[3] - 1.0]);
    let jac =
        |x: &DVector<f64>| DMatrix::from_row_slice(2, 4, &[2.0 * x[0], 2.0 * x[1], 0.0, 0.0, 0.0, 0.0, 1.0, -2.0]);
    let analytic = Problem::new(2, 4, f).with_jacobian(jac);
    let numeric = Problem::new(2, 4, f);

    let x0 = DVector::from_vec(vec![3.0, -1.0, 2.0, 2.0]);
    println!("Jacobian check: {:.2e}", jacobian_mismatch(&analytic, &x0).unwrap());

    let opts = SolveOptions::new(Method::Mngn2AlphaBetaDelta);
    for (name, p) in [("analytic J", &analytic), ("differences", &numeric)] {
        let res = solve(p, &x0, &opts)?;
        println!(
            "{name:<12} x = {:.5?} |x| = {:.5}",
            res.x_final.as_slice(),
            res.x_final.norm()
        );
    }

    // Prefer solutions close to xbar instead of close to the origin.
    let xbar = DVector::from_vec(vec![0.0, 5.0, 3.0, 0.0]);
    let res = solve(&analytic, &x0, &opts.clone().with_model_profile(xbar.clone()))?;
    println!(
        "toward xbar  x = {:.5?} |x - xbar| = {:.5}",
        res.x_final.as_slice(),
        (&res.x_final - &xbar).norm()
    );
    Ok(())
}
