//! Minimal-norm Gauss-Newton methods for underdetermined nonlinear least
//! squares, with rank estimation and a relaxed null-space correction.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod problems;
pub mod rank;
pub mod relaxation;
pub mod solver;

pub use error::{Error, Result};
pub use problems::{ProblemConfig, ProblemKind, RegularizerSpec, TestProblem, VectorSpec};
pub use rank::RankParams;
pub use solver::{solve, solve_observed, FailureReason, Method, Problem, SolveOptions, SolveResult};
