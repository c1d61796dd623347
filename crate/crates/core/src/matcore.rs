//! Dense complex linear algebra.
//!
//! Everything in the crate is carried by [`ComplexMatrix`], a row-major
//! dense matrix of `Complex64`. Tensor products follow a single global
//! convention: for factors with dimensions `(d1, d2, d3)` the composite
//! index is `((i1 * d2) + i2) * d3 + i3`, factor 1 varying slowest.
//! [`kron`] and [`partial_trace`] both obey it.
//!
//! Hermitian eigenproblems are solved with cyclic complex Jacobi, which is
//! unconditionally stable and accurate for the small dimensions (at most a
//! few hundred) used here. Spectral matrix functions (`exp`, `log`,
//! `sqrt`) are evaluated through that decomposition.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::{Error, Result};

/// Absolute tolerance on `max |A - A^†|` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Relative off-diagonal Frobenius threshold at which Jacobi stops.
pub const JACOBI_OFF_TOL: f64 = 1e-13;

/// Sweep cap for the Jacobi eigensolver.
pub const JACOBI_MAX_SWEEPS: usize = 100;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix stored row-major: `data[i * cols + j] = A[i, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major data, rejecting bad lengths and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidData {
                rows,
                cols,
                got: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from real row slices (test and fixture convenience).
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    /// The projector-like outer product `|v><w|`.
    pub fn outer(v: &[Complex64], w: &[Complex64]) -> Self {
        Self::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
    }

    /// The rank-one projector `|v><v|` (no normalization).
    pub fn projector(v: &[Complex64]) -> Self {
        Self::outer(v, v)
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> Complex64 {
        self.diagonal().into_iter().sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Re Tr(A^† B)`, the real Frobenius inner product.
    pub fn frobenius_dot(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// `max |A - A^†|`; infinite for non-square input.
    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol
    }

    /// `(A + A^†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        debug_assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `<v, A v>` (real part; exact for Hermitian `A`).
    pub fn expectation(&self, v: &[Complex64]) -> f64 {
        inner(v, &self.mul_vec(v)).re
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rrow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix sum dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix difference dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        self.map(|z| -z)
    }
}

/// Kronecker product with `(A⊗B)[i*rB + k, j*cB + l] = A[i,j] * B[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (rb, cb) = (b.rows, b.cols);
    let mut out = ComplexMatrix::zeros(a.rows * rb, a.cols * cb);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a list of matrices, left to right.
pub fn kron_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    factors
        .iter()
        .fold(ComplexMatrix::identity(1), |acc, f| kron(&acc, f))
}

/// Tensor product of vectors under the same index convention as [`kron`].
pub fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x * y))
        .collect()
}

/// Conjugate-linear in the first argument.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalized(v: &[Complex64]) -> Vec<Complex64> {
    let n = vec_norm(v);
    v.iter().map(|z| z / n).collect()
}

/// Standard basis vector `e_i` of length `n`.
pub fn basis_vector(n: usize, i: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; n];
    v[i] = ONE;
    v
}

/// Ordered tensor-factor dimensions annotating a square matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactorShape {
    dims: Vec<usize>,
}

impl FactorShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "factor dimensions must be a non-empty list of positive integers, got {dims:?}"
            )));
        }
        Ok(Self { dims })
    }

    /// Single-factor shape of dimension `d`.
    pub fn single(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_factors(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Shape of the kept factors, in their original order.
    pub fn select(&self, keep: &[usize]) -> Result<Self> {
        Self::new(keep.iter().map(|&k| self.dims[k]).collect())
    }
}

/// Partial trace over every factor not listed in `keep`.
///
/// `keep` may be given in any order; the output factors appear in their
/// original order. Keeping nothing yields the 1x1 full trace.
pub fn partial_trace(a: &ComplexMatrix, shape: &FactorShape, keep: &[usize]) -> Result<ComplexMatrix> {
    a.require_square()?;
    if a.rows != shape.total() {
        return Err(Error::ShapeMismatch(format!(
            "matrix side {} does not match factor shape {:?}",
            a.rows,
            shape.dims()
        )));
    }
    let nf = shape.num_factors();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&k| k >= nf) {
        return Err(Error::ShapeMismatch(format!(
            "factor index {bad} out of range for {nf} factors"
        )));
    }
    let traced: Vec<usize> = (0..nf).filter(|f| !keep.contains(f)).collect();

    let dims = shape.dims();
    let mut strides = vec![1usize; nf];
    for f in (0..nf.saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * dims[f + 1];
    }
    let offsets = |factors: &[usize]| -> Vec<usize> {
        // Enumerate the sub-multi-index in row-major order over `factors`.
        let mut offs = vec![0usize];
        for &f in factors {
            let mut next = Vec::with_capacity(offs.len() * dims[f]);
            for &o in &offs {
                for digit in 0..dims[f] {
                    next.push(o + digit * strides[f]);
                }
            }
            offs = next;
        }
        offs
    };
    let keep_off = offsets(&keep);
    let trace_off = offsets(&traced);

    let n_out = keep_off.len();
    let mut out = ComplexMatrix::zeros(n_out, n_out);
    for (i, &oi) in keep_off.iter().enumerate() {
        for (j, &oj) in keep_off.iter().enumerate() {
            out[(i, j)] = trace_off.iter().map(|&t| a[(oi + t, oj + t)]).sum();
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are orthonormal eigenvectors, in eigenvalue order.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        self.eigenvectors.column(k)
    }

    /// `V f(Λ) V^†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &fk) in fl.iter().enumerate() {
            if fk == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * fk;
                for j in i..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        for i in 0..n {
            out[(i, i)].im = 0.0;
            for j in 0..i {
                out[(i, j)] = out[(j, i)].conj();
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|l| l)
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn herm_eig(a: &ComplexMatrix) -> Result<HermitianEig> {
    a.require_square()?;
    let asym = a.max_asymmetry();
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian(asym));
    }
    let n = a.rows;
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm();

    let off_norm = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    if scale > 0.0 {
        let mut sweeps = 0;
        loop {
            let off = off_norm(&m);
            if off <= JACOBI_OFF_TOL * scale {
                break;
            }
            if sweeps == JACOBI_MAX_SWEEPS {
                return Err(Error::NoConvergence { sweeps, off });
            }
            sweeps += 1;
            for p in 0..n {
                for q in (p + 1)..n {
                    let g = m[(p, q)];
                    let gabs = g.norm();
                    if gabs <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let (c, s, phase) = jacobi_rotation(m[(p, p)].re, m[(q, q)].re, g);
                    rotate_hermitian(&mut m, p, q, c, s, phase);
                    rotate_columns(&mut v, p, q, c, s, phase);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, ascending.
pub fn herm_eigvals(a: &ComplexMatrix) -> Result<Vec<f64>> {
    herm_eig(a).map(|e| e.eigenvalues)
}

/// Rotation `J = [[c, s], [-s e^{-iα}, c e^{-iα}]]` with `e^{iα} = g/|g|`
/// that diagonalizes `[[a, g], [conj(g), b]]` under `J^† (·) J`.
fn jacobi_rotation(a: f64, b: f64, g: Complex64) -> (f64, f64, Complex64) {
    let h = g.norm();
    let phase = g / h;
    let zeta = (b - a) / (2.0 * h);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, t * c, phase)
}

fn rotate_columns(m: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let pc = phase.conj();
    for i in 0..m.rows {
        let mp = m[(i, p)];
        let mq = m[(i, q)];
        m[(i, p)] = mp * c - mq * (pc * s);
        m[(i, q)] = mp * s + mq * (pc * c);
    }
}

fn rotate_hermitian(m: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    rotate_columns(m, p, q, c, s, phase);
    // Rows: new row p = c*row_p - s*e^{iα} row_q ; row q = s row_p + c e^{iα} row_q.
    for j in 0..m.cols {
        let rp = m[(p, j)];
        let rq = m[(q, j)];
        m[(p, j)] = rp * c - rq * (phase * s);
        m[(q, j)] = rp * s + rq * (phase * c);
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)].im = 0.0;
    m[(q, q)].im = 0.0;
}

/// `exp(A)` for Hermitian `A` via its eigendecomposition.
pub fn matrix_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(herm_eig(a)?.apply(f64::exp))
}

/// Principal `log(A)` for Hermitian positive definite `A`
/// (requires `λ_min > 1e-12`).
pub fn matrix_log(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(a)?;
    let min_eig = eig.min_eigenvalue();
    if min_eig <= 1e-12 {
        return Err(Error::NotPositiveDefinite {
            what: "matrix".into(),
            min_eig,
        });
    }
    Ok(eig.apply(f64::ln))
}

/// Positive square root of a Hermitian PSD matrix; negative eigenvalues
/// are clipped to zero.
pub fn matrix_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(herm_eig(a)?.apply(|l| l.max(0.0).sqrt()))
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    Ok(herm_eigvals(a)?.iter().map(|l| l.abs()).sum())
}

/// Singular values (descending) and an orthonormal basis of the column
/// span, by one-sided (Hestenes) Jacobi. Columns whose singular value is
/// at most `rank_tol` are dropped from the basis.
#[derive(Debug, Clone)]
pub struct ColumnSpan {
    pub singular_values: Vec<f64>,
    pub basis: Vec<Vec<Complex64>>,
}

impl ColumnSpan {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

pub fn column_span(columns: &[Vec<Complex64>], rank_tol: f64) -> ColumnSpan {
    let (cols, _) = one_sided_jacobi(columns.to_vec(), false);
    let mut pairs: Vec<(f64, Vec<Complex64>)> = cols.into_iter().map(|c| (vec_norm(&c), c)).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let singular_values = pairs.iter().map(|p| p.0).collect();
    let basis = pairs
        .into_iter()
        .filter(|(s, _)| *s > rank_tol)
        .map(|(s, c)| c.iter().map(|z| z / s).collect())
        .collect();
    ColumnSpan {
        singular_values,
        basis,
    }
}

/// Orthogonalizes columns pairwise until mutually orthogonal. Returns the
/// rotated columns and, when requested, the accumulated unitary `J` with
/// `C_in J = C_out`.
fn one_sided_jacobi(mut cols: Vec<Vec<Complex64>>, accumulate: bool) -> (Vec<Vec<Complex64>>, Option<ComplexMatrix>) {
    let k = cols.len();
    let mut acc = accumulate.then(|| ComplexMatrix::identity(k));
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let a = cols[p].iter().map(|z| z.norm_sqr()).sum::<f64>();
                let b = cols[q].iter().map(|z| z.norm_sqr()).sum::<f64>();
                let g = inner(&cols[p], &cols[q]);
                let gabs = g.norm();
                if gabs <= 1e-15 * (a * b).sqrt() || gabs <= f64::MIN_POSITIVE {
                    continue;
                }
                rotated = true;
                let (c, s, phase) = jacobi_rotation(a, b, g);
                let pc = phase.conj();
                let (lo, hi) = cols.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = xp * c - xq * (pc * s);
                    *y = xp * s + xq * (pc * c);
                }
                if let Some(j) = acc.as_mut() {
                    rotate_columns(j, p, q, c, s, phase);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (cols, acc)
}

/// Completes an orthonormal set in `C^n` to an orthonormal basis; returns
/// only the added vectors.
pub fn orthonormal_complement(basis: &[Vec<Complex64>], n: usize) -> Vec<Vec<Complex64>> {
    let mut all: Vec<Vec<Complex64>> = basis.to_vec();
    let mut added = Vec::new();
    while all.len() < n {
        let mut best: Option<(f64, Vec<Complex64>)> = None;
        for i in 0..n {
            let mut r = basis_vector(n, i);
            for _ in 0..2 {
                for b in &all {
                    let c = inner(b, &r);
                    for (x, y) in r.iter_mut().zip(b) {
                        *x -= c * y;
                    }
                }
            }
            let nr = vec_norm(&r);
            if best.as_ref().is_none_or(|(bn, _)| nr > *bn) {
                best = Some((nr, r));
            }
        }
        let (nr, r) = best.expect("n > 0");
        if nr < 1e-8 {
            break;
        }
        let r: Vec<Complex64> = r.iter().map(|z| z / nr).collect();
        all.push(r.clone());
        added.push(r);
    }
    added
}

/// Full SVD `C = U diag(s) V^†` of a square matrix (descending `s`).
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

pub fn svd_square(c: &ComplexMatrix) -> Result<Svd> {
    c.require_square()?;
    let n = c.rows;
    let cols: Vec<Vec<Complex64>> = (0..n).map(|j| c.column(j)).collect();
    let (rot, j) = one_sided_jacobi(cols, true);
    let j = j.expect("accumulated");
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = rot.iter().map(|c| vec_norm(c)).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let scale = norms.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut ucols = Vec::new();
    for &k in &order {
        if norms[k] > 1e-13 * scale {
            ucols.push(rot[k].iter().map(|z| z / norms[k]).collect::<Vec<_>>());
        }
    }
    let extra = orthonormal_complement(&ucols, n);
    ucols.extend(extra);
    let u = ComplexMatrix::from_columns(&ucols);
    let v = ComplexMatrix::from_fn(n, n, |i, k| j[(i, order[k])]);
    let s = order.iter().map(|&k| norms[k]).collect();
    Ok(Svd { u, s, v })
}
