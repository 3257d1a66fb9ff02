//! Minimizing a seminorm |L x| instead of |x| through the GSVD of (J, L).
//!
//! cargo run --example gsvd_seminorm

use mngn2::linalg;
use mngn2::problems::{ProblemConfig, ProblemKind, RegularizerSpec};
use mngn2::solver::{solve, Method, SolveOptions};
use nalgebra::DVector;

fn main() -> mngn2::Result<()> {
    let tp = ProblemConfig::new(ProblemKind::SpherePlanes).build()?;
    let n = tp.problem.var_dim();
    let l = RegularizerSpec::SecondDifference.matrix(n)?;

    let x = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    let g = linalg::gsvd(&tp.problem.jacobian(&x), &l)?;
    println!("layout {:?}", g.layout);
    println!("c = {:.4?}", g.c.as_slice());
    println!("s = {:.4?}", g.s.as_slice());

    let x0 = DVector::from_fn(n, |i, _| ((i * 7) % 5) as f64 - 2.0);
    for (name, reg) in [("|x|", None), ("|D2 x|", Some(l.clone()))] {
        let mut opts = SolveOptions::new(Method::Mngn2AlphaBetaDelta);
        if let Some(l) = reg {
            opts = opts.with_regularizer(l);
        }
        let res = solve(&tp.problem, &x0, &opts)?;
        println!(
            "minimizing {name:<7} converged={} |x| = {:.4} |D2 x| = {:.4}",
            res.converged,
            res.x_final.norm(),
            (&l * &res.x_final).norm()
        );
    }
    Ok(())
}
