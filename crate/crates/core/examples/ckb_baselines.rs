//! Convex-combination baselines against the relaxed minimal-norm method on
//! the sphere-planes problem, whose minimal-norm solution is e_1.
//!
//! cargo run --example ckb_baselines

use mngn2::bench::{self, BenchSpec, ExportFormat, MethodRun};
use mngn2::problems::{ProblemConfig, ProblemKind, VectorSpec};
use mngn2::solver::Method;

fn main() -> mngn2::Result<()> {
    let methods = [
        Method::Ckb1,
        Method::Ckb2,
        Method::RCkb1,
        Method::RCkb2,
        Method::Mngn2AlphaBetaDelta,
    ];
    let mut spec = BenchSpec::new(
        ProblemConfig::new(ProblemKind::SpherePlanes).with_c(VectorSpec::FirstOnly(2.0)),
        methods.iter().map(|&m| MethodRun::new(m)).collect(),
    );
    spec.template.n_trials = 50;
    spec.template.seed = 3;
    let report = bench::run_bench(&spec, None)?;
    print!("{}", bench::export(&report, ExportFormat::Table)?);
    println!("optimal |x| = 1");
    Ok(())
}
