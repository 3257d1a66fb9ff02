//! Benchmark tables over 100 random starts in (-5, 5)^n.
//!
//! cargo run --release --example bench_tables -- [robot|paraboloid|rank|sphere|seminorm|chain|circle]
//!
//! With no argument every table is printed.

use mngn2::bench::{self, BenchSpec, ExportFormat, MethodRun};
use mngn2::problems::{ProblemConfig, ProblemKind, RegularizerSpec, VectorSpec};
use mngn2::solver::Method::{self, *};

fn plain(methods: &[Method]) -> Vec<MethodRun> {
    methods.iter().map(|&m| MethodRun::new(m)).collect()
}

fn table(title: &str, mut spec: BenchSpec) -> mngn2::Result<()> {
    spec.template.seed = 1;
    let report = bench::run_bench(&spec, None)?;
    println!("== {title}");
    print!("{}", bench::export(&report, ExportFormat::Table)?);
    println!();
    Ok(())
}

fn main() -> mngn2::Result<()> {
    let which = std::env::args().nth(1);
    let wants = |name: &str| which.as_deref().is_none_or(|w| w == name);
    let first2 = VectorSpec::FirstOnly(2.0);

    if wants("robot") {
        let spec = BenchSpec::new(
            ProblemConfig::new(ProblemKind::Robot),
            plain(&[Mngn, Mngn2Alpha, Mngn2AlphaBetaDelta, Ckb1, Ckb2]),
        );
        table("robot arm", spec)?;
    }
    if wants("paraboloid") {
        let mut runs = vec![
            MethodRun::with_eta(Mngn2AlphaBeta, 8.0),
            MethodRun::with_eta(Mngn2AlphaBeta, 2.0),
        ];
        runs.extend(plain(&[Mngn2Alpha, Mngn2AlphaBetaDelta, Ckb1, Ckb2]));
        table(
            "paraboloid",
            BenchSpec::new(ProblemConfig::new(ProblemKind::Paraboloid), runs),
        )?;
    }
    if wants("rank") {
        let mut runs = plain(&[Mngn, Mngn2Alpha]);
        runs.push(MethodRun::with_eta(Mngn2AlphaBeta, 8.0));
        runs.extend(plain(&[Mngn2AlphaBetaDelta, Ckb1, Ckb2, RCkb1, RCkb2]));
        let cfg = ProblemConfig::new(ProblemKind::EllipsoidProduct).with_c(first2.clone());
        table("ellipsoid-product, c = first2", BenchSpec::new(cfg, runs))?;
    }
    if wants("sphere") {
        let mut runs = plain(&[Mngn2Alpha]);
        runs.push(MethodRun::with_eta(Mngn2AlphaBeta, 8.0));
        runs.extend(plain(&[Mngn2AlphaBetaDelta, RCkb1, RCkb2]));
        let cfg = ProblemConfig::new(ProblemKind::SpherePlanes).with_c(first2.clone());
        table("sphere-planes, c = first2", BenchSpec::new(cfg, runs))?;
    }
    if wants("seminorm") {
        for reg in [RegularizerSpec::Identity, RegularizerSpec::SecondDifference] {
            let mut spec = BenchSpec::new(
                ProblemConfig::new(ProblemKind::SpherePlanes),
                plain(&[Mngn2Alpha, Mngn2AlphaBetaDelta, RCkb1, RCkb2]),
            );
            let title = format!("sphere-planes, L = {}", reg.id());
            spec.template.regularizer = Some(reg);
            table(&title, spec)?;
        }
    }
    if wants("chain") {
        for xbar in [
            VectorSpec::Constant(0.0),
            VectorSpec::Constant(2.0),
            VectorSpec::Constant(1.7),
        ] {
            let mut runs = plain(&[Mngn2Alpha]);
            runs.push(MethodRun::with_eta(Mngn2AlphaBeta, 8.0));
            runs.extend(plain(&[Mngn2AlphaBetaDelta]));
            let mut spec = BenchSpec::new(ProblemConfig::new(ProblemKind::Chain), runs);
            let title = format!("chain, xbar = {xbar}");
            spec.template.model_profile = Some(xbar);
            table(&title, spec)?;
        }
    }
    if wants("circle") {
        let spec = BenchSpec::new(
            ProblemConfig::new(ProblemKind::Circle2d),
            plain(&[Mngn, Mngn2Alpha, Mngn2AlphaBetaDelta]),
        );
        table("circle2d", spec)?;
    }
    Ok(())
}
