//! Built-in test problems, derivative regularizers and Jacobian checks.
//!
//! All built-in problems fit `F(x) = 0` and ship an analytic Jacobian.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::Problem;

/// Base step of the central-difference Jacobian, `eps^(1/3)`.
pub const FD_STEP: f64 = 6.055454452393343e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Robot,
    Paraboloid,
    Circle2d,
    EllipsoidProduct,
    SpherePlanes,
    Chain,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 6] = [
        ProblemKind::Robot,
        ProblemKind::Paraboloid,
        ProblemKind::Circle2d,
        ProblemKind::EllipsoidProduct,
        ProblemKind::SpherePlanes,
        ProblemKind::Chain,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ProblemKind::Robot => "robot",
            ProblemKind::Paraboloid => "paraboloid",
            ProblemKind::Circle2d => "circle2d",
            ProblemKind::EllipsoidProduct => "ellipsoid-product",
            ProblemKind::SpherePlanes => "sphere-planes",
            ProblemKind::Chain => "chain",
        }
    }

    /// Whether `m`, `n`, `a` and `c` apply.
    pub fn is_sized(self) -> bool {
        matches!(
            self,
            ProblemKind::EllipsoidProduct | ProblemKind::SpherePlanes | ProblemKind::Chain
        )
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL.into_iter().find(|k| k.id() == s).ok_or_else(|| {
            let valid: Vec<&str> = ProblemKind::ALL.iter().map(|k| k.id()).collect();
            Error::invalid(format!("unknown problem '{s}' (valid: {})", valid.join(", ")))
        })
    }
}

/// A parameter vector given by shape rather than by value.
///
/// Text forms: `zero`, `ones`, `two-e`, `<v>e` (constant), `first2` or
/// `first<v>` (`v` in the first slot, zeros elsewhere) and comma lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum VectorSpec {
    Constant(f64),
    FirstOnly(f64),
    List(Vec<f64>),
}

impl VectorSpec {
    pub fn build(&self, n: usize) -> Result<DVector<f64>> {
        match self {
            VectorSpec::Constant(v) => Ok(DVector::from_element(n, *v)),
            VectorSpec::FirstOnly(v) => {
                let mut x = DVector::zeros(n);
                if n > 0 {
                    x[0] = *v;
                }
                Ok(x)
            }
            VectorSpec::List(xs) => {
                if xs.len() != n {
                    return Err(Error::invalid(format!("vector has {} entries, expected {n}", xs.len())));
                }
                Ok(DVector::from_column_slice(xs))
            }
        }
    }
}

impl fmt::Display for VectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorSpec::Constant(v) if *v == 0.0 => f.write_str("zero"),
            VectorSpec::Constant(v) if *v == 1.0 => f.write_str("ones"),
            VectorSpec::Constant(v) if *v == 2.0 => f.write_str("two-e"),
            VectorSpec::Constant(v) => write!(f, "{v}e"),
            VectorSpec::FirstOnly(v) => write!(f, "first{v}"),
            VectorSpec::List(xs) => {
                let parts: Vec<String> = xs.iter().map(|v| v.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

fn parse_real(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("'{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::invalid(format!("'{s}' is not finite")));
    }
    Ok(v)
}

/// Comma-separated list of reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_real).collect()
}

impl FromStr for VectorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "zero" => return Ok(VectorSpec::Constant(0.0)),
            "ones" | "e" => return Ok(VectorSpec::Constant(1.0)),
            "two-e" => return Ok(VectorSpec::Constant(2.0)),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("first") {
            return parse_real(rest).map(VectorSpec::FirstOnly);
        }
        if !s.contains(',') {
            if let Some(rest) = s.strip_suffix('e') {
                if let Ok(v) = parse_real(rest) {
                    return Ok(VectorSpec::Constant(v));
                }
            }
        }
        parse_list(s).map(VectorSpec::List).map_err(|_| {
            Error::invalid(format!(
                "cannot read vector '{s}' (use zero, ones, two-e, <v>e, first<v> or a comma list)"
            ))
        })
    }
}

impl From<VectorSpec> for String {
    fn from(v: VectorSpec) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for VectorSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Problem selection plus every parameter any problem may need. Fields a
/// problem does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub m: usize,
    pub n: usize,
    pub a: VectorSpec,
    pub c: VectorSpec,
    pub delta: f64,
    pub gamma: f64,
}

impl ProblemConfig {
    pub fn new(kind: ProblemKind) -> Self {
        ProblemConfig {
            kind,
            m: 8,
            n: 10,
            a: VectorSpec::Constant(1.0),
            c: VectorSpec::Constant(2.0),
            delta: 0.75,
            gamma: 2.0,
        }
    }

    pub fn sized(kind: ProblemKind, m: usize, n: usize) -> Self {
        ProblemConfig {
            m,
            n,
            ..ProblemConfig::new(kind)
        }
    }

    pub fn with_c(mut self, c: VectorSpec) -> Self {
        self.c = c;
        self
    }

    pub fn with_a(mut self, a: VectorSpec) -> Self {
        self.a = a;
        self
    }

    pub fn build(&self) -> Result<TestProblem> {
        match self.kind {
            ProblemKind::Robot => Ok(make_robot()),
            ProblemKind::Paraboloid => Ok(make_paraboloid()),
            ProblemKind::Circle2d => make_circle2d(self.delta, self.gamma),
            ProblemKind::EllipsoidProduct | ProblemKind::SpherePlanes | ProblemKind::Chain => {
                let a = self.a.build(self.n)?;
                let c = self.c.build(self.n)?;
                match self.kind {
                    ProblemKind::EllipsoidProduct => make_ellipsoid_product(self.m, self.n, a, c),
                    ProblemKind::SpherePlanes => make_sphere_planes(self.m, self.n, a, c),
                    _ => make_chain(self.m, self.n, a, c),
                }
            }
        }
    }

    /// Unknowns of the configured problem.
    pub fn var_dim(&self) -> usize {
        match self.kind {
            ProblemKind::Robot => 4,
            ProblemKind::Paraboloid => 3,
            ProblemKind::Circle2d => 2,
            _ => self.n,
        }
    }
}

/// Parameters a built problem was made with.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProblemParams {
    pub a: Option<Vec<f64>>,
    pub c: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    /// Target point `(X, Y)`, arm length `A` and base offset `H` of the robot.
    pub robot: Option<[f64; 4]>,
}

#[derive(Debug, Clone)]
pub struct TestProblem {
    pub problem: Problem,
    pub name: String,
    pub params: ProblemParams,
    /// Minimal-norm solution when it is known in closed form.
    pub known_solution: Option<DVector<f64>>,
    /// `|x_dagger|` when known.
    pub known_norm: Option<f64>,
}

impl TestProblem {
    fn new(problem: Problem, name: &str, params: ProblemParams) -> Self {
        TestProblem {
            problem,
            name: name.to_string(),
            params,
            known_solution: None,
            known_norm: None,
        }
    }

    fn with_solution(mut self, x: DVector<f64>) -> Self {
        self.known_norm = Some(x.norm());
        self.known_solution = Some(x);
        self
    }
}

pub const ROBOT_TARGET: (f64, f64) = (3.0, 3.0);
pub const ROBOT_ARM: f64 = 2.0;
pub const ROBOT_OFFSET: f64 = 10.0;

/// Two-arm planar positioning: each row says the distance from an arm tip to
/// the target equals the corresponding extension.
pub fn make_robot() -> TestProblem {
    let (xt, yt) = ROBOT_TARGET;
    let (a, h) = (ROBOT_ARM, ROBOT_OFFSET);
    let f = move |x: &DVector<f64>| {
        let (s1, c1) = x[0].sin_cos();
        let (s3, c3) = x[2].sin_cos();
        DVector::from_vec(vec![
            (xt - a * c1).powi(2) + (yt - a * s1).powi(2) - x[1] * x[1],
            (xt - a * c3 - h).powi(2) + (yt - a * s3).powi(2) - x[3] * x[3],
        ])
    };
    let jac = move |x: &DVector<f64>| {
        let (s1, c1) = x[0].sin_cos();
        let (s3, c3) = x[2].sin_cos();
        let mut j = DMatrix::zeros(2, 4);
        j[(0, 0)] = 2.0 * a * (xt - a * c1) * s1 - 2.0 * a * (yt - a * s1) * c1;
        j[(0, 1)] = -2.0 * x[1];
        j[(1, 2)] = 2.0 * a * (xt - a * c3 - h) * s3 - 2.0 * a * (yt - a * s3) * c3;
        j[(1, 3)] = -2.0 * x[3];
        j
    };
    let params = ProblemParams {
        robot: Some([xt, yt, a, h]),
        ..Default::default()
    };
    TestProblem::new(Problem::new(2, 4, f).with_jacobian(jac), "robot", params)
}

/// Minimal-norm point of `x3 = (x1-1)^2 + 2(x2-2)^2 + 3`.
///
/// Stationarity gives `x = mu grad F`, which reduces to one scalar equation in
/// the multiplier `mu`, solved here by bisection.
fn paraboloid_min_norm() -> DVector<f64> {
    let g = |mu: f64| mu - (1.0 + 2.0 * mu).powi(-2) - 8.0 * (1.0 + 4.0 * mu).powi(-2) - 3.0;
    let (mut lo, mut hi) = (3.0, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    DVector::from_vec(vec![2.0 * mu / (1.0 + 2.0 * mu), 8.0 * mu / (1.0 + 4.0 * mu), mu])
}

/// Elliptic paraboloid `x3 - (x1-1)^2 - 2(x2-2)^2 - 3 = 0`, vertex `(1, 2, 3)`.
pub fn make_paraboloid() -> TestProblem {
    let f = |x: &DVector<f64>| DVector::from_element(1, x[2] - (x[0] - 1.0).powi(2) - 2.0 * (x[1] - 2.0).powi(2) - 3.0);
    let jac = |x: &DVector<f64>| DMatrix::from_row_slice(1, 3, &[-2.0 * (x[0] - 1.0), -4.0 * (x[1] - 2.0), 1.0]);
    TestProblem::new(
        Problem::new(1, 3, f).with_jacobian(jac),
        "paraboloid",
        ProblemParams::default(),
    )
    .with_solution(paraboloid_min_norm())
}

/// `delta^2 |x - gamma e|^2 - 1`: the circle of radius `1/delta` around
/// `(gamma, gamma)`.
pub fn make_circle2d(delta: f64, gamma: f64) -> Result<TestProblem> {
    if delta == 0.0 || !delta.is_finite() || !gamma.is_finite() {
        return Err(Error::invalid("circle2d needs a finite nonzero delta and finite gamma"));
    }
    let d2 = delta * delta;
    let f =
        move |x: &DVector<f64>| DVector::from_element(1, d2 * ((x[0] - gamma).powi(2) + (x[1] - gamma).powi(2)) - 1.0);
    let jac =
        move |x: &DVector<f64>| DMatrix::from_row_slice(1, 2, &[2.0 * d2 * (x[0] - gamma), 2.0 * d2 * (x[1] - gamma)]);
    let params = ProblemParams {
        delta: Some(delta),
        gamma: Some(gamma),
        ..Default::default()
    };
    let tp = TestProblem::new(Problem::new(1, 2, f).with_jacobian(jac), "circle2d", params);
    let radius = 1.0 / delta.abs();
    let center = DVector::from_element(2, gamma);
    let cn = center.norm();
    // nearest point of the circle to the origin; undefined at the center
    Ok(if cn > 0.0 {
        tp.with_solution(&center * (1.0 - radius / cn))
    } else {
        tp
    })
}

fn check_sized(m: usize, n: usize, a: &DVector<f64>, c: &DVector<f64>) -> Result<()> {
    if n == 0 || m == 0 || m > n {
        return Err(Error::invalid(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
    }
    if a.len() != n || c.len() != n {
        return Err(Error::invalid("a and c must have length n"));
    }
    if a.iter().any(|&v| v == 0.0 || !v.is_finite()) || c.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("semiaxes a must be finite and nonzero, c finite"));
    }
    Ok(())
}

/// `S(x) = sum ((x_j - c_j)/a_j)^2 - 1`
fn ellipsoid(x: &DVector<f64>, a: &DVector<f64>, c: &DVector<f64>) -> f64 {
    x.iter()
        .zip(a.iter().zip(c.iter()))
        .map(|(x, (a, c))| ((x - c) / a).powi(2))
        .sum::<f64>()
        - 1.0
}

/// `z_j = (x_j - c_j) / a_j^2`
fn ellipsoid_half_gradient(x: &DVector<f64>, a: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(x.len(), (0..x.len()).map(|j| (x[j] - c[j]) / (a[j] * a[j])))
}

fn is_ones(a: &DVector<f64>) -> bool {
    a.iter().all(|&v| v == 1.0)
}

/// Nearest point of the unit sphere around `c` to the origin.
fn sphere_nearest(c: &DVector<f64>) -> Option<DVector<f64>> {
    let cn = c.norm();
    (cn > 1.0).then(|| c * (1.0 - 1.0 / cn))
}

fn sized_params(a: &DVector<f64>, c: &DVector<f64>) -> ProblemParams {
    ProblemParams {
        a: Some(a.as_slice().to_vec()),
        c: Some(c.as_slice().to_vec()),
        ..Default::default()
    }
}

/// `F_i = S(x) (x_i^2 + 1) / 2`, `i <= m`. The solution locus is the
/// ellipsoid `S = 0` and the Jacobian has rank one there.
pub fn make_ellipsoid_product(m: usize, n: usize, a: DVector<f64>, c: DVector<f64>) -> Result<TestProblem> {
    check_sized(m, n, &a, &c)?;
    let params = sized_params(&a, &c);
    let known = if is_ones(&a) { sphere_nearest(&c) } else { None };
    let (af, cf) = (a.clone(), c.clone());
    let f = move |x: &DVector<f64>| {
        let s = ellipsoid(x, &af, &cf);
        DVector::from_iterator(m, (0..m).map(|i| 0.5 * s * (x[i] * x[i] + 1.0)))
    };
    let jac = move |x: &DVector<f64>| {
        let s = ellipsoid(x, &a, &c);
        let z = ellipsoid_half_gradient(x, &a, &c);
        let y = DVector::from_iterator(m, (0..m).map(|i| x[i] * x[i] + 1.0));
        let mut j = &y * z.transpose();
        for i in 0..m {
            j[(i, i)] += s * x[i];
        }
        j
    };
    let tp = TestProblem::new(Problem::new(m, n, f).with_jacobian(jac), "ellipsoid-product", params);
    Ok(match known {
        Some(x) => tp.with_solution(x),
        None => tp,
    })
}

/// `F_i = S(x) (x_i - c_i)`, `i <= m`. The solution locus is the ellipsoid
/// together with the affine set `x_i = c_i, i <= m`; the Jacobian is
/// `S I_{m x n} + 2 y z^T`.
pub fn make_sphere_planes(m: usize, n: usize, a: DVector<f64>, c: DVector<f64>) -> Result<TestProblem> {
    check_sized(m, n, &a, &c)?;
    let params = sized_params(&a, &c);
    let known = if is_ones(&a) {
        let mut plane = DVector::zeros(n);
        plane.rows_mut(0, m).copy_from(&c.rows(0, m));
        match sphere_nearest(&c) {
            Some(sphere) if sphere.norm_squared() <= plane.norm_squared() => Some(sphere),
            _ => Some(plane),
        }
    } else {
        None
    };
    let (af, cf) = (a.clone(), c.clone());
    let f = move |x: &DVector<f64>| {
        let s = ellipsoid(x, &af, &cf);
        DVector::from_iterator(m, (0..m).map(|i| s * (x[i] - cf[i])))
    };
    let jac = move |x: &DVector<f64>| {
        let s = ellipsoid(x, &a, &c);
        let z = ellipsoid_half_gradient(x, &a, &c);
        let y = DVector::from_iterator(m, (0..m).map(|i| x[i] - c[i]));
        let mut j = 2.0 * &y * z.transpose();
        for i in 0..m {
            j[(i, i)] += s;
        }
        j
    };
    let tp = TestProblem::new(Problem::new(m, n, f).with_jacobian(jac), "sphere-planes", params);
    Ok(match known {
        Some(x) => tp.with_solution(x),
        None => tp,
    })
}

/// `F_1 = S(x)`, `F_i = x_{i-1} (x_i - c_i)` for `2 <= i <= m`.
pub fn make_chain(m: usize, n: usize, a: DVector<f64>, c: DVector<f64>) -> Result<TestProblem> {
    if m < 2 {
        return Err(Error::invalid("chain needs m >= 2"));
    }
    check_sized(m, n, &a, &c)?;
    let params = sized_params(&a, &c);
    let known = if !is_ones(&a) {
        None
    } else if c.iter().all(|&v| v == 2.0) {
        let xi = 2.0 - ((n - m + 1) as f64).powf(-0.5);
        let mut x = DVector::from_element(n, xi);
        x.rows_mut(1, m - 1).fill(2.0);
        Some(x)
    } else if c[0] == 2.0 && c.iter().skip(1).all(|&v| v == 0.0) {
        let mut x = DVector::zeros(n);
        x[0] = 1.0;
        Some(x)
    } else {
        None
    };
    let (af, cf) = (a.clone(), c.clone());
    let f = move |x: &DVector<f64>| {
        let mut r = DVector::zeros(m);
        r[0] = ellipsoid(x, &af, &cf);
        for i in 1..m {
            r[i] = x[i - 1] * (x[i] - cf[i]);
        }
        r
    };
    let jac = move |x: &DVector<f64>| {
        let z = ellipsoid_half_gradient(x, &a, &c);
        let mut j = DMatrix::zeros(m, n);
        for k in 0..n {
            j[(0, k)] = 2.0 * z[k];
        }
        for i in 1..m {
            j[(i, i - 1)] = x[i] - c[i];
            j[(i, i)] = x[i - 1];
        }
        j
    };
    let tp = TestProblem::new(Problem::new(m, n, f).with_jacobian(jac), "chain", params);
    Ok(match known {
        Some(x) => tp.with_solution(x),
        None => tp,
    })
}

/// Discrete first (`(n-1) x n`, stencil `1, -1`) or second (`(n-2) x n`,
/// stencil `1, -2, 1`) derivative.
pub fn derivative_operator(order: usize, n: usize) -> Result<DMatrix<f64>> {
    let stencil: &[f64] = match order {
        1 => &[1.0, -1.0],
        2 => &[1.0, -2.0, 1.0],
        _ => return Err(Error::invalid(format!("derivative order must be 1 or 2, got {order}"))),
    };
    if n <= order {
        return Err(Error::invalid(format!("derivative of order {order} needs n > {order}")));
    }
    let mut d = DMatrix::zeros(n - order, n);
    for i in 0..n - order {
        for (k, &w) in stencil.iter().enumerate() {
            d[(i, i + k)] = w;
        }
    }
    Ok(d)
}

/// Replaces a tall `L` (`p > n`) by the `n x n` triangular factor of its
/// compact QR, which leaves `|L x|` unchanged. Other shapes pass through.
pub fn compact_qr_reduce(l: &DMatrix<f64>) -> DMatrix<f64> {
    if l.nrows() <= l.ncols() {
        return l.clone();
    }
    l.clone().qr().r()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RegularizerRepr", try_from = "RegularizerRepr")]
pub enum RegularizerSpec {
    Identity,
    FirstDifference,
    SecondDifference,
    Custom(DMatrix<f64>),
}

impl RegularizerSpec {
    pub fn matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        match self {
            RegularizerSpec::Identity => Ok(DMatrix::identity(n, n)),
            RegularizerSpec::FirstDifference => derivative_operator(1, n),
            RegularizerSpec::SecondDifference => derivative_operator(2, n),
            RegularizerSpec::Custom(l) => {
                if l.ncols() != n {
                    return Err(Error::invalid(format!(
                        "regularizer has {} columns, expected {n}",
                        l.ncols()
                    )));
                }
                Ok(l.clone())
            }
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            RegularizerSpec::Identity => "identity",
            RegularizerSpec::FirstDifference => "d1",
            RegularizerSpec::SecondDifference => "d2",
            RegularizerSpec::Custom(_) => "custom",
        }
    }
}

/// Serialized form: a name, or the rows of a custom matrix.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RegularizerRepr {
    Named(String),
    Rows(Vec<Vec<f64>>),
}

impl From<RegularizerSpec> for RegularizerRepr {
    fn from(r: RegularizerSpec) -> Self {
        match r {
            RegularizerSpec::Custom(l) => {
                RegularizerRepr::Rows(l.row_iter().map(|row| row.iter().copied().collect()).collect())
            }
            named => RegularizerRepr::Named(named.id().to_string()),
        }
    }
}

impl TryFrom<RegularizerRepr> for RegularizerSpec {
    type Error = Error;

    fn try_from(r: RegularizerRepr) -> Result<Self> {
        match r {
            RegularizerRepr::Named(s) => s.parse(),
            RegularizerRepr::Rows(rows) => {
                let ncols = rows.first().map_or(0, |r| r.len());
                if rows.is_empty() || rows.iter().any(|r| r.len() != ncols) {
                    return Err(Error::invalid(
                        "custom regularizer rows must be nonempty and equal length",
                    ));
                }
                let flat: Vec<f64> = rows.concat();
                Ok(RegularizerSpec::Custom(DMatrix::from_row_slice(
                    rows.len(),
                    ncols,
                    &flat,
                )))
            }
        }
    }
}

impl FromStr for RegularizerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "I" => Ok(RegularizerSpec::Identity),
            "d1" | "D1" => Ok(RegularizerSpec::FirstDifference),
            "d2" | "D2" => Ok(RegularizerSpec::SecondDifference),
            _ => Err(Error::invalid(format!(
                "unknown regularizer '{s}' (valid: identity, d1, d2)"
            ))),
        }
    }
}

/// Central-difference Jacobian of `F` with per-coordinate step
/// `h (1 + |x_i|)`. Non-finite evaluations show up in the result.
pub fn fd_jacobian(problem: &Problem, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let (m, n) = (problem.residual_dim(), problem.var_dim());
    let mut j = DMatrix::zeros(m, n);
    let mut xp = x.clone();
    for i in 0..n {
        let step = h * (1.0 + x[i].abs());
        xp[i] = x[i] + step;
        let fp = problem.eval(&xp);
        xp[i] = x[i] - step;
        let fm = problem.eval(&xp);
        xp[i] = x[i];
        j.set_column(i, &((fp - fm) / (2.0 * step)));
    }
    j
}

/// Largest entrywise gap between analytic and finite-difference Jacobians,
/// relative to `max(1, max |J|)`.
pub fn jacobian_mismatch(problem: &Problem, x: &DVector<f64>) -> Option<f64> {
    let ja = problem.analytic_jacobian(x)?;
    let jf = fd_jacobian(problem, x, FD_STEP);
    let scale = ja.amax().max(1.0);
    Some((ja - jf).amax() / scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub const JACOBIAN_CHECK_TOL: f64 = 1e-6;
pub const SOLUTION_RESIDUAL_TOL: f64 = 1e-8;

/// Self-checks of a problem: analytic Jacobian against finite differences at
/// `points` random points in `(-5, 5)^n`, and the residual of the known
/// solution.
pub fn check_problem(tp: &TestProblem, points: usize, seed: u64) -> Vec<CheckOutcome> {
    let p = &tp.problem;
    let mut out = Vec::new();
    if p.has_analytic_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let x = DVector::from_fn(p.var_dim(), |_, _| rng.random_range(-5.0..5.0));
            worst = worst.max(jacobian_mismatch(p, &x).unwrap_or(f64::INFINITY));
        }
        out.push(CheckOutcome {
            name: "jacobian".into(),
            passed: worst <= JACOBIAN_CHECK_TOL,
            detail: format!("max relative gap {worst:.3e} over {points} points"),
        });
    }
    if let Some(x) = &tp.known_solution {
        let r = p.residual_norm(x);
        out.push(CheckOutcome {
            name: "known-solution".into(),
            passed: r <= SOLUTION_RESIDUAL_TOL,
            detail: format!("|F(x) - b| = {r:.3e} at |x| = {:.6}", x.norm()),
        });
    }
    out
}
