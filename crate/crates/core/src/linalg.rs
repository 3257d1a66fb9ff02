//! Dense factorizations used by the step computations: a full SVD (via faer),
//! the GSVD of a matrix pair, null-space projections and the two
//! right-hand-side solve against `W^{-1}`.
//!
//! All routines are pure functions of their arguments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold below which the stacked matrix `[J; L]` is declared
/// rank deficient.
pub const DEGENERATE_PAIR_TOL: f64 = 1e-10;

fn check_finite(name: &str, a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} has non-finite entries")))
    }
}

/// Full singular value decomposition `A = U diag(sigma) V^T` with square
/// orthogonal `U` (m x m) and `V` (n x n).
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    /// Nonincreasing, length `min(m, n)`.
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn shape(&self) -> (usize, usize) {
        (self.u.nrows(), self.v.nrows())
    }

    /// `m x n` matrix carrying the singular values on its main diagonal.
    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        let (m, n) = self.shape();
        let mut s = DMatrix::zeros(m, n);
        for (i, &v) in self.sigma.iter().enumerate() {
            s[(i, i)] = v;
        }
        s
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * self.sigma_matrix() * self.v.transpose()
    }

    /// Orthonormal basis `V_2 = [v_{rank+1}, ..., v_n]` of the numerical null
    /// space for the given rank.
    pub fn null_space_basis(&self, rank: usize) -> NullSpaceBasis {
        let n = self.v.nrows();
        let rank = rank.min(n);
        NullSpaceBasis {
            columns: self.v.columns(rank, n - rank).into_owned(),
            rows: None,
        }
    }
}

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Computes the full SVD of `a`. Singular values are sorted nonincreasing and
/// never clamped.
pub fn svd(a: &DMatrix<f64>) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::invalid("svd of an empty matrix"));
    }
    check_finite("matrix", a)?;
    let dec = to_faer(a)
        .svd()
        .map_err(|e| Error::Factorization(format!("SVD failed: {e:?}")))?;
    let s = dec.S().column_vector();
    Ok(SvdFactors {
        u: from_faer(dec.U()),
        sigma: DVector::from_fn(m.min(n), |i, _| s[i]),
        v: from_faer(dec.V()),
    })
}

/// Singular values only, sorted nonincreasing.
pub fn singular_values(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::invalid("svd of an empty matrix"));
    }
    check_finite("matrix", a)?;
    to_faer(a)
        .singular_values()
        .map(DVector::from_vec)
        .map_err(|e| Error::Factorization(format!("SVD failed: {e:?}")))
}

/// Removes from `v` its components along `basis` (two passes of classical
/// Gram-Schmidt).
fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let proj = b.dot(v);
            v.axpy(-proj, b, 1.0);
        }
    }
}

/// Builds a `dim x dim` orthogonal matrix. Slots holding `Some` keep their
/// (already orthonormal) vector; `None` slots and any slots beyond the input
/// length are filled with unit-vector completions.
fn complete_orthonormal(dim: usize, slots: Vec<Option<DVector<f64>>>) -> DMatrix<f64> {
    let mut slots = slots;
    slots.resize(dim, None);
    let mut accepted: Vec<DVector<f64>> = slots.iter().flatten().cloned().collect();
    for slot in slots.iter_mut().filter(|s| s.is_none()) {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = -1.0;
        for k in 0..dim {
            let mut e = DVector::zeros(dim);
            e[k] = 1.0;
            orthogonalize(&mut e, &accepted);
            let nrm = e.norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = Some(e);
            }
        }
        let mut e = best.expect("dimension is positive");
        e /= best_norm;
        orthogonalize(&mut e, &accepted);
        e.normalize_mut();
        accepted.push(e.clone());
        *slot = Some(e);
    }
    let cols: Vec<DVector<f64>> = slots.into_iter().map(|s| s.expect("filled")).collect();
    DMatrix::from_columns(&cols)
}

/// Shape bookkeeping for the GSVD of an `m x n` / `p x n` pair.
///
/// The columns of `W` are laid out as `[structural zeros | c-block | identity]`
/// with widths `n - q`, `q - d` and `d`, where `q = min(m, n)` and
/// `d = n - p`. The structural block is empty when `m >= n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl BlockLayout {
    /// Index of the first column of `W` that can carry a nonzero `c`.
    pub fn offset(&self) -> usize {
        self.n - self.q
    }

    pub fn c_block_len(&self) -> usize {
        self.q - self.d
    }
}

/// Generalized singular value decomposition `J = U Sigma_J W^{-1}`,
/// `L = V Sigma_L W^{-1}`.
#[derive(Debug, Clone)]
pub struct GsvdFactors {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub winv: DMatrix<f64>,
    /// Nondecreasing cosines of the c-block (length `q - d`). Values for the
    /// numerical null space of `J` are tiny but kept as computed.
    pub c: DVector<f64>,
    /// Sines matching `c`, nonincreasing.
    pub s: DVector<f64>,
    pub layout: BlockLayout,
}

impl GsvdFactors {
    /// Diagonal of `Sigma_J` indexed by the columns of `W`.
    pub fn c_full(&self) -> DVector<f64> {
        let BlockLayout { n, d, .. } = self.layout;
        let off = self.layout.offset();
        let mut c = DVector::zeros(n);
        c.rows_mut(off, self.c.len()).copy_from(&self.c);
        c.rows_mut(n - d, d).fill(1.0);
        c
    }

    /// Diagonal of `Sigma_L` indexed by the columns of `W` (zero on the
    /// identity block).
    pub fn s_full(&self) -> DVector<f64> {
        let n = self.layout.n;
        let off = self.layout.offset();
        let mut s = DVector::zeros(n);
        s.rows_mut(0, off).fill(1.0);
        s.rows_mut(off, self.s.len()).copy_from(&self.s);
        s
    }

    /// `gamma_i = c_i / s_i` over the c-block.
    pub fn generalized_values(&self) -> DVector<f64> {
        self.c.zip_map(&self.s, |c, s| c / s)
    }

    pub fn sigma_j(&self) -> DMatrix<f64> {
        let BlockLayout { m, n, q, .. } = self.layout;
        let off = self.layout.offset();
        let c = self.c_full();
        let mut sj = DMatrix::zeros(m, n);
        for i in 0..q {
            sj[(i, off + i)] = c[off + i];
        }
        sj
    }

    pub fn sigma_l(&self) -> DMatrix<f64> {
        let BlockLayout { n, p, .. } = self.layout;
        let s = self.s_full();
        let mut sl = DMatrix::zeros(p, n);
        for i in 0..p {
            sl[(i, i)] = s[i];
        }
        sl
    }

    /// Row block `\hat W_1`: the first `n - rank` rows of `W^{-1}`.
    pub fn winv_head(&self, rank: usize) -> DMatrix<f64> {
        let n = self.layout.n;
        self.winv.rows(0, n - rank.min(n)).into_owned()
    }

    /// Oblique null-space basis `W_1` (first `n - rank` columns of `W`),
    /// obtained by solving against `W^{-1}` rather than inverting it.
    pub fn null_space_basis(&self, rank: usize) -> Result<NullSpaceBasis> {
        let n = self.layout.n;
        let k = n - rank.min(n);
        let mut rhs = DMatrix::zeros(n, k);
        for i in 0..k {
            rhs[(i, i)] = 1.0;
        }
        let lu = self.winv.clone().lu();
        let columns = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Factorization("W^{-1} is singular".into()))?;
        Ok(NullSpaceBasis {
            columns,
            rows: Some(self.winv_head(rank)),
        })
    }
}

/// GSVD of the pair `(J, L)` computed from a QR factorization of the stacked
/// matrix followed by a CS decomposition of the orthonormal factor.
///
/// Requires `p <= n`, `m + p >= n` and `N(J) ∩ N(L) = {0}`.
pub fn gsvd(j: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<GsvdFactors> {
    let (m, n) = j.shape();
    let (p, nl) = l.shape();
    if m == 0 || n == 0 || p == 0 {
        return Err(Error::invalid("gsvd of an empty matrix"));
    }
    if nl != n {
        return Err(Error::invalid(format!("column mismatch: J has {n}, L has {nl}")));
    }
    if p > n {
        return Err(Error::invalid(format!(
            "L has {p} rows > {n} columns; reduce it with a compact QR first"
        )));
    }
    if m + p < n {
        return Err(Error::invalid(format!("m + p = {} < n = {n}", m + p)));
    }
    check_finite("J", j)?;
    check_finite("L", l)?;

    let mut stacked = DMatrix::zeros(m + p, n);
    stacked.rows_mut(0, m).copy_from(j);
    stacked.rows_mut(m, p).copy_from(l);
    let qr = stacked.qr();
    let q = qr.q();
    let r = qr.r();

    let sv = singular_values(&r)?;
    let (largest, smallest) = (sv[0], sv[n - 1]);
    if !(smallest >= DEGENERATE_PAIR_TOL * largest) || largest == 0.0 {
        return Err(Error::DegeneratePair { smallest, largest });
    }

    let q1 = q.rows(0, m).into_owned();
    let q2 = q.rows(m, p).into_owned();
    // Q2 = V S Z^T; columns p.. of Z span N(Q2) and form the identity block.
    let cs = svd(&q2)?;
    let mut z = cs.v;
    let mut v = cs.u;
    let mut s_all = cs.sigma;

    let d = n - p;
    let qdim = m.min(n);
    let layout = BlockLayout { m, n, p, d, q: qdim };
    let off = layout.offset();
    let clen = layout.c_block_len();

    let b = &q1 * &z;
    let c_raw: Vec<f64> = b.column_iter().map(|col| col.norm()).collect();

    // Order the c-block by ascending c, permuting Z, V and s together.
    let mut order: Vec<usize> = (off..off + clen).collect();
    order.sort_by(|&a, &bb| c_raw[a].total_cmp(&c_raw[bb]));
    let z_old = z.clone();
    let v_old = v.clone();
    let s_old = s_all.clone();
    let mut c = DVector::zeros(clen);
    let mut s = DVector::zeros(clen);
    for (k, &src) in order.iter().enumerate() {
        let dst = off + k;
        z.set_column(dst, &z_old.column(src));
        v.set_column(dst, &v_old.column(src));
        s_all[dst] = s_old[src];
        c[k] = c_raw[src];
        s[k] = s_old[src];
    }
    let b = &q1 * &z;

    // U column i pairs with W column off + i. Larger c gives a more accurate
    // direction, so those columns are fixed first.
    let mut accepted: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut slots: Vec<Option<DVector<f64>>> = vec![None; m];
    for i in (0..qdim).rev() {
        let mut col = b.column(off + i).into_owned();
        let raw = col.norm();
        if raw == 0.0 {
            continue;
        }
        orthogonalize(&mut col, &accepted);
        let nrm = col.norm();
        if nrm <= 1e-10 * raw || !nrm.is_finite() {
            continue;
        }
        col /= nrm;
        accepted.push(col.clone());
        slots[i] = Some(col);
    }
    let u = complete_orthonormal(m, slots);

    let winv = z.transpose() * r;
    Ok(GsvdFactors {
        u,
        v,
        winv,
        c,
        s,
        layout,
    })
}

/// Basis of a null space: orthonormal (`rows == None`, SVD path) or oblique
/// (`rows == Some(\hat W_1)`, GSVD path, with `rows * columns = I`).
#[derive(Debug, Clone)]
pub struct NullSpaceBasis {
    pub columns: DMatrix<f64>,
    pub rows: Option<DMatrix<f64>>,
}

impl NullSpaceBasis {
    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.rows.is_none()
    }

    /// Applies the projector onto the spanned subspace: `V_2 V_2^T v` or
    /// `W_1 \hat W_1 v`.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.columns.nrows() {
            return Err(Error::invalid(format!(
                "vector length {} does not match basis dimension {}",
                v.len(),
                self.columns.nrows()
            )));
        }
        if self.dim() == 0 {
            return Ok(DVector::zeros(v.len()));
        }
        let coeffs = match &self.rows {
            None => self.columns.tr_mul(v),
            Some(rows) => rows * v,
        };
        Ok(&self.columns * coeffs)
    }

    /// Coordinates of `v` that the projector removes: `V_2^T v` or `\hat W_1 v`.
    pub fn coordinates(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.rows {
            None => self.columns.tr_mul(v),
            Some(rows) => rows * v,
        }
    }

    /// Largest column norm of `J * columns`.
    pub fn annihilation_residual(&self, j: &DMatrix<f64>) -> f64 {
        (j * &self.columns).column_iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// `V_2 V_2^T v` for an orthonormal basis.
pub fn orthogonal_null_projection(basis: &NullSpaceBasis, v: &DVector<f64>) -> Result<DVector<f64>> {
    if !basis.is_orthonormal() {
        return Err(Error::invalid("orthogonal projection needs an orthonormal basis"));
    }
    basis.project(v)
}

/// Solves `W^{-1} [t, s_tilde] = [[\hat W_1 (x - xbar), 0], [0, y_tail]]` with
/// one LU factorization of `W^{-1}`, giving the oblique correction
/// `t = W_1 \hat W_1 (x - xbar)` and the step `s_tilde`.
pub fn oblique_null_projection_and_step(
    factors: &GsvdFactors,
    x_minus_xbar: &DVector<f64>,
    y_tail: &DVector<f64>,
    rank: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = factors.layout.n;
    if x_minus_xbar.len() != n {
        return Err(Error::invalid(format!(
            "x - xbar has length {}, expected {n}",
            x_minus_xbar.len()
        )));
    }
    if rank > n || y_tail.len() != rank {
        return Err(Error::invalid(format!(
            "rank {rank} with y_tail of length {} (n = {n})",
            y_tail.len()
        )));
    }
    let k = n - rank;
    let mut rhs = DMatrix::zeros(n, 2);
    if k > 0 {
        let head = factors.winv.rows(0, k) * x_minus_xbar;
        rhs.view_mut((0, 0), (k, 1)).copy_from(&head);
    }
    rhs.view_mut((k, 1), (rank, 1)).copy_from(y_tail);
    let lu = factors.winv.clone().lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Factorization("W^{-1} is singular".into()))?;
    Ok((sol.column(0).into_owned(), sol.column(1).into_owned()))
}
