//! Numerical decision procedure for extension existence.
//!
//! [`solve`] first restricts the search to the face of the PSD cone that
//! any extension must live in: if `u` is in the kernel of `ρ12` then
//! `u ⊗ x` is in the kernel of every extension for every `x ∈ H3`, and
//! likewise `x ⊗ v` for `v` in the kernel of `ρ23`. When those vectors
//! span the whole space no extension exists and the vectors form a
//! [`NullspaceCertificate`]. Otherwise Dykstra's alternating projections
//! run between the PSD cone and the marginal affine set, written in
//! isometric real coordinates of Hermitian matrices on the face.
//!
//! The module also builds the separable no-extension family and checks
//! for common purifications.

use num_complex::Complex64;

use crate::matcore::{
    column_span, herm_eig, inner, kron, kron_vec, normalized, partial_trace, trace_norm, vec_norm,
    ComplexMatrix, FactorShape,
};
use crate::states::{CompatiblePair, DensityMatrix};
use crate::{Error, Result};

/// Singular values above this count toward a certificate's span.
pub const CERT_RANK_TOL: f64 = 1e-9;

/// Kernel vectors must satisfy `<u, ρ u> ≤ 1e-12`.
pub const KERNEL_TOL: f64 = 1e-12;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Orthogonal projection onto the PSD cone (eigenvalue clipping).
pub fn project_psd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(&a.hermitian_part())?;
    Ok(eig.apply(|l| l.max(0.0)).hermitian_part())
}

/// Isometric real coordinates of an `r × r` Hermitian matrix: the
/// diagonal, then `√2 Re h_ij`, `√2 Im h_ij` for `i < j`.
fn herm_to_coords(h: &ComplexMatrix) -> Vec<f64> {
    let r = h.rows();
    let mut out = Vec::with_capacity(r * r);
    for i in 0..r {
        out.push(h[(i, i)].re);
        for j in (i + 1)..r {
            let z = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            out.push(SQRT2 * z.re);
            out.push(SQRT2 * z.im);
        }
    }
    out
}

fn coords_to_herm(x: &[f64], r: usize) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(r, r);
    let mut k = 0;
    for i in 0..r {
        h[(i, i)] = Complex64::new(x[k], 0.0);
        k += 1;
        for j in (i + 1)..r {
            let z = Complex64::new(x[k], x[k + 1]) / SQRT2;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

/// Unit-norm Hermitian basis element matching coordinate `k` of
/// [`herm_to_coords`], as `(i, j, kind)` with kind 0 diag, 1 real, 2 imag.
fn coord_layout(r: usize) -> Vec<(usize, usize, u8)> {
    let mut out = Vec::with_capacity(r * r);
    for i in 0..r {
        out.push((i, i, 0));
        for j in (i + 1)..r {
            out.push((i, j, 1));
            out.push((i, j, 2));
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Affine marginal constraints `Tr3 X = ρ12`, `Tr1 X = ρ23` restricted to
/// `X = B W B^†` for an isometry `B` (the identity when no face is given).
///
/// The real-linear operator `A` and the pseudo-inverse factor
/// `K = A^T (A A^T)^+` are assembled once; projection is
/// `x ← x − K (A x − b)`.
#[derive(Debug, Clone)]
pub struct MarginalConstraints {
    shape: FactorShape,
    face: Option<ComplexMatrix>,
    r: usize,
    m: usize,
    a: Vec<f64>,
    k: Vec<f64>,
    b: Vec<f64>,
    rank: usize,
}

impl MarginalConstraints {
    /// Constraints on the full space `H1 ⊗ H2 ⊗ H3`.
    pub fn new(pair: &CompatiblePair) -> Result<Self> {
        Self::on_face(pair, None)
    }

    /// Constraints on the face spanned by the columns of `face`
    /// (orthonormal, `d1 d2 d3` rows).
    pub fn on_face(pair: &CompatiblePair, face: Option<ComplexMatrix>) -> Result<Self> {
        let shape = pair.shape123();
        let n = shape.total();
        let r = match &face {
            Some(b) if b.rows() != n => {
                return Err(Error::ShapeMismatch(format!("face basis has {} rows, expected {n}", b.rows())))
            }
            Some(b) => b.cols(),
            None => n,
        };
        let n2 = r * r;
        let mut b = herm_to_coords(pair.rho12().matrix());
        b.extend(herm_to_coords(pair.rho23().matrix()));
        let m = b.len();

        let cols: Vec<Vec<Complex64>> = face
            .as_ref()
            .map(|f| (0..r).map(|j| f.column(j)).collect())
            .unwrap_or_default();
        let mut a = vec![0.0; m * n2];
        for (k, &(i, j, kind)) in coord_layout(r).iter().enumerate() {
            let e = match (&face, kind) {
                (None, _) => {
                    let mut e = ComplexMatrix::zeros(n, n);
                    match kind {
                        0 => e[(i, i)] = Complex64::new(1.0, 0.0),
                        1 => {
                            e[(i, j)] = Complex64::new(1.0 / SQRT2, 0.0);
                            e[(j, i)] = Complex64::new(1.0 / SQRT2, 0.0);
                        }
                        _ => {
                            e[(i, j)] = Complex64::new(0.0, 1.0 / SQRT2);
                            e[(j, i)] = Complex64::new(0.0, -1.0 / SQRT2);
                        }
                    }
                    e
                }
                (Some(_), 0) => ComplexMatrix::outer(&cols[i], &cols[i]),
                (Some(_), 1) => (&ComplexMatrix::outer(&cols[i], &cols[j]) + &ComplexMatrix::outer(&cols[j], &cols[i]))
                    .scale(1.0 / SQRT2),
                (Some(_), _) => (&ComplexMatrix::outer(&cols[i], &cols[j]) - &ComplexMatrix::outer(&cols[j], &cols[i]))
                    .scale_complex(Complex64::new(0.0, 1.0 / SQRT2)),
            };
            let mut col = herm_to_coords(&partial_trace(&e, &shape, &[0, 1])?);
            col.extend(herm_to_coords(&partial_trace(&e, &shape, &[1, 2])?));
            for (row, v) in col.into_iter().enumerate() {
                a[row * n2 + k] = v;
            }
        }

        // Gram matrix and its rank-revealing pseudo-inverse.
        let mut gram = ComplexMatrix::zeros(m, m);
        for p in 0..m {
            let rp = &a[p * n2..(p + 1) * n2];
            for q in p..m {
                let v = dot(rp, &a[q * n2..(q + 1) * n2]);
                gram[(p, q)] = Complex64::new(v, 0.0);
                gram[(q, p)] = Complex64::new(v, 0.0);
            }
        }
        let eig = herm_eig(&gram)?;
        let cutoff = 1e-10 * eig.max_eigenvalue().max(1.0);
        let rank = eig.eigenvalues.iter().filter(|l| **l > cutoff).count();
        let pinv = eig.apply(|l| if l > cutoff { 1.0 / l } else { 0.0 });
        // K = A^T G^+  (n2 × m)
        let mut kmat = vec![0.0; n2 * m];
        for p in 0..m {
            for q in 0..m {
                let g = pinv[(p, q)].re;
                if g == 0.0 {
                    continue;
                }
                for c in 0..n2 {
                    kmat[c * m + q] += a[p * n2 + c] * g;
                }
            }
        }
        Ok(Self {
            shape,
            face,
            r,
            m,
            a,
            k: kmat,
            b,
            rank,
        })
    }

    /// Dimension of the face (`d1 d2 d3` without reduction).
    pub fn face_dim(&self) -> usize {
        self.r
    }

    /// Number of independent constraint rows.
    pub fn rank(&self) -> usize {
        self.rank
    }

    fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        let n2 = self.r * self.r;
        (0..self.m).map(|p| dot(&self.a[p * n2..(p + 1) * n2], x)).collect()
    }

    fn project_coords(&self, x: &[f64]) -> Vec<f64> {
        let mut res = self.apply_a(x);
        res.iter_mut().zip(&self.b).for_each(|(r, b)| *r -= b);
        let mut out = x.to_vec();
        for (c, o) in out.iter_mut().enumerate() {
            *o -= dot(&self.k[c * self.m..(c + 1) * self.m], &res);
        }
        out
    }

    /// Least-squares distance `min_x ‖A x − b‖` of the constraints on this
    /// face; zero (to rounding) iff the face admits matching Hermitian
    /// matrices.
    pub fn inconsistency(&self) -> f64 {
        let x = self.project_coords(&vec![0.0; self.r * self.r]);
        let mut res = self.apply_a(&x);
        res.iter_mut().zip(&self.b).for_each(|(r, b)| *r -= b);
        norm2(&res)
    }

    /// Orthogonal projection of a Hermitian `W` (face coordinates) onto the
    /// affine set.
    pub fn project(&self, w: &ComplexMatrix) -> Result<ComplexMatrix> {
        if w.rows() != self.r || w.cols() != self.r {
            return Err(Error::ShapeMismatch(format!(
                "expected {0}x{0}, got {1}x{2}",
                self.r,
                w.rows(),
                w.cols()
            )));
        }
        Ok(coords_to_herm(&self.project_coords(&herm_to_coords(w)), self.r))
    }

    /// `B W B^†`.
    pub fn lift(&self, w: &ComplexMatrix) -> ComplexMatrix {
        match &self.face {
            None => w.clone(),
            Some(b) => (&(b * w) * &b.adjoint()).hermitian_part(),
        }
    }

    /// `B^† X B`.
    pub fn restrict(&self, x: &ComplexMatrix) -> ComplexMatrix {
        match &self.face {
            None => x.clone(),
            Some(b) => (&(&b.adjoint() * x) * b).hermitian_part(),
        }
    }

    pub fn shape(&self) -> &FactorShape {
        &self.shape
    }
}

/// Orthogonal projection of `X` onto `{X : Tr3 X = ρ12, Tr1 X = ρ23}`.
pub fn project_marginal_affine(x: &ComplexMatrix, pair: &CompatiblePair) -> Result<ComplexMatrix> {
    let c = MarginalConstraints::new(pair)?;
    if x.rows() != c.face_dim() || x.cols() != c.face_dim() {
        return Err(Error::ShapeMismatch(format!(
            "matrix is {}x{}, pair needs {}",
            x.rows(),
            x.cols(),
            c.face_dim()
        )));
    }
    c.project(x)
}

/// Max of the trace-norm distances `‖Tr3 X − ρ12‖₁`, `‖Tr1 X − ρ23‖₁`.
pub fn marginal_residual(x: &ComplexMatrix, pair: &CompatiblePair) -> Result<f64> {
    let shape = pair.shape123();
    let r12 = trace_norm(&(&partial_trace(x, &shape, &[0, 1])? - pair.rho12().matrix()))?;
    let r23 = trace_norm(&(&partial_trace(x, &shape, &[1, 2])? - pair.rho23().matrix()))?;
    Ok(r12.max(r23))
}

/// Which marginal forces a certificate vector into the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcedBy {
    /// `v = u ⊗ x`, `u ∈ ker ρ12`, `x ∈ H3`.
    Rho12,
    /// `v = x ⊗ u`, `x ∈ H1`, `u ∈ ker ρ23`.
    Rho23,
}

/// A vector in the kernel of every extension, with its product structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcedNullVector {
    pub forced_by: ForcedBy,
    pub kernel_vector: Vec<Complex64>,
    pub free_vector: Vec<Complex64>,
    pub vector: Vec<Complex64>,
}

impl ForcedNullVector {
    pub fn new(forced_by: ForcedBy, kernel_vector: Vec<Complex64>, free_vector: Vec<Complex64>) -> Self {
        let vector = match forced_by {
            ForcedBy::Rho12 => kron_vec(&kernel_vector, &free_vector),
            ForcedBy::Rho23 => kron_vec(&free_vector, &kernel_vector),
        };
        Self {
            forced_by,
            kernel_vector,
            free_vector,
            vector,
        }
    }
}

/// Vectors forced into the kernel of any extension. The certificate
/// proves infeasibility iff `span_dim = d1 d2 d3`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullspaceCertificate {
    pub vectors: Vec<ForcedNullVector>,
    pub span_dim: usize,
    pub dim: usize,
}

impl NullspaceCertificate {
    pub fn new(vectors: Vec<ForcedNullVector>, dim: usize) -> Self {
        let span_dim = span_dimension(&vectors);
        Self {
            vectors,
            span_dim,
            dim,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.span_dim == self.dim
    }

    /// Copy with vector `k` removed.
    pub fn without(&self, k: usize) -> Self {
        let mut v = self.vectors.clone();
        v.remove(k);
        Self::new(v, self.dim)
    }
}

fn span_dimension(vectors: &[ForcedNullVector]) -> usize {
    let cols: Vec<Vec<Complex64>> = vectors.iter().map(|v| v.vector.clone()).collect();
    if cols.is_empty() {
        return 0;
    }
    column_span(&cols, CERT_RANK_TOL).rank()
}

/// Checks every vector's forcing property against the pair and that the
/// vectors span `H1 ⊗ H2 ⊗ H3`.
pub fn verify_certificate(pair: &CompatiblePair, cert: &NullspaceCertificate) -> bool {
    let (d1, d2, d3) = pair.dims();
    let n = d1 * d2 * d3;
    if cert.dim != n {
        return false;
    }
    for v in &cert.vectors {
        let (rho, free_dim) = match v.forced_by {
            ForcedBy::Rho12 => (pair.rho12(), d3),
            ForcedBy::Rho23 => (pair.rho23(), d1),
        };
        if v.vector.len() != n || v.kernel_vector.len() != rho.dim() || v.free_vector.len() != free_dim {
            return false;
        }
        let rebuilt = ForcedNullVector::new(v.forced_by, v.kernel_vector.clone(), v.free_vector.clone());
        let diff: f64 = rebuilt
            .vector
            .iter()
            .zip(&v.vector)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let unorm = vec_norm(&v.kernel_vector);
        if unorm == 0.0 || vec_norm(&v.free_vector) == 0.0 || diff > 1e-12 * vec_norm(&v.vector).max(1.0) {
            return false;
        }
        if rho.matrix().expectation(&v.kernel_vector) / (unorm * unorm) > KERNEL_TOL {
            return false;
        }
    }
    span_dimension(&cert.vectors) == n
}

/// Kernel vectors of both marginals tensored with a basis of the free
/// factor.
pub fn forced_null_vectors(pair: &CompatiblePair) -> Result<Vec<ForcedNullVector>> {
    let (d1, _, d3) = pair.dims();
    let mut out = Vec::new();
    for (rho, forced_by, free_dim) in [
        (pair.rho12(), ForcedBy::Rho12, d3),
        (pair.rho23(), ForcedBy::Rho23, d1),
    ] {
        let eig = herm_eig(rho.matrix())?;
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l > KERNEL_TOL {
                continue;
            }
            let u = eig.eigenvector(k);
            for e in 0..free_dim {
                out.push(ForcedNullVector::new(
                    forced_by,
                    u.clone(),
                    crate::matcore::basis_vector(free_dim, e),
                ));
            }
        }
    }
    Ok(out)
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub feas_tol: f64,
    pub infeas_tol: f64,
    pub stall_window: usize,
    pub stall_rel_change: f64,
    /// Restrict to the face cut out by forced kernel vectors first.
    pub facial_reduction: bool,
    /// Iterations between witness checks.
    pub check_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            feas_tol: 1e-9,
            infeas_tol: 1e-6,
            stall_window: 100,
            stall_rel_change: 1e-12,
            facial_reduction: true,
            check_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    Undecided,
}

impl std::fmt::Display for FeasibilityStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Feasible => "FEASIBLE",
            Self::Infeasible => "INFEASIBLE",
            Self::Undecided => "UNDECIDED",
        })
    }
}

/// What backs an `Infeasible` verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfeasibilityEvidence {
    /// Forced kernel vectors span the whole space.
    Certificate,
    /// The marginal equations have no Hermitian solution on the forced
    /// face; carries the least-squares residual.
    FaceInconsistent { residual: f64 },
    /// Alternating projections stalled with the given gap.
    GapStall { gap: f64 },
}

#[derive(Debug, Clone)]
pub struct FeasibilityVerdict {
    pub status: FeasibilityStatus,
    /// Present iff `Feasible`; eigenvalues may dip to `-feas_tol`.
    pub witness: Option<DensityMatrix>,
    pub certificate: Option<NullspaceCertificate>,
    pub evidence: Option<InfeasibilityEvidence>,
    /// Marginal residual of the last candidate (trace norm).
    pub residual: f64,
    /// Frobenius distance between the last PSD and affine iterates.
    pub gap: f64,
    pub iterations: usize,
    /// Dimension of the face searched.
    pub face_dim: usize,
}

impl FeasibilityVerdict {
    fn infeasible(evidence: InfeasibilityEvidence, gap: f64, iterations: usize, face_dim: usize) -> Self {
        Self {
            status: FeasibilityStatus::Infeasible,
            witness: None,
            certificate: None,
            evidence: Some(evidence),
            residual: f64::NAN,
            gap,
            iterations,
            face_dim,
        }
    }
}

/// Decides whether the pair has a common extension.
pub fn solve(pair: &CompatiblePair, opts: &SolveOptions) -> Result<FeasibilityVerdict> {
    let shape = pair.shape123();
    let n = shape.total();

    let mut face = None;
    if opts.facial_reduction {
        let forced = forced_null_vectors(pair)?;
        if !forced.is_empty() {
            let cols: Vec<Vec<Complex64>> = forced.iter().map(|v| v.vector.clone()).collect();
            let span = column_span(&cols, CERT_RANK_TOL);
            if span.rank() == n {
                let cert = NullspaceCertificate::new(forced, n);
                let mut v = FeasibilityVerdict::infeasible(InfeasibilityEvidence::Certificate, f64::INFINITY, 0, 0);
                v.certificate = Some(cert);
                return Ok(v);
            }
            if span.rank() > 0 {
                let comp = crate::matcore::orthonormal_complement(&span.basis, n);
                face = Some(ComplexMatrix::from_columns(&comp));
            }
        }
    }
    let cons = MarginalConstraints::on_face(pair, face)?;
    let r = cons.face_dim();

    let inconsistency = cons.inconsistency();
    if inconsistency >= opts.infeas_tol {
        return Ok(FeasibilityVerdict::infeasible(
            InfeasibilityEvidence::FaceInconsistent {
                residual: inconsistency,
            },
            inconsistency,
            0,
            r,
        ));
    }

    let start = pair.rho1().tensor(pair.rho2()).tensor(&pair.rho3());
    let mut x = herm_to_coords(&cons.restrict(start.matrix()));
    let mut p = vec![0.0; r * r];
    let mut gaps: Vec<f64> = Vec::with_capacity(opts.max_iter);
    let mut residual = f64::INFINITY;
    let mut gap = f64::INFINITY;

    for iter in 1..=opts.max_iter {
        let xp: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = herm_to_coords(&project_psd(&coords_to_herm(&xp, r))?);
        p = xp.iter().zip(&y).map(|(a, b)| a - b).collect();
        x = cons.project_coords(&y);
        gap = norm2(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        gaps.push(gap);

        if iter % opts.check_every == 0 || iter == opts.max_iter || gap == 0.0 {
            let w = coords_to_herm(&x, r);
            let min_eig = herm_eig(&w)?.min_eigenvalue();
            if min_eig >= -opts.feas_tol {
                let lifted = cons.lift(&w);
                residual = marginal_residual(&lifted, pair)?;
                if residual <= opts.feas_tol {
                    return Ok(FeasibilityVerdict {
                        status: FeasibilityStatus::Feasible,
                        witness: Some(DensityMatrix::from_parts_unchecked(lifted, shape)),
                        certificate: None,
                        evidence: None,
                        residual,
                        gap,
                        iterations: iter,
                        face_dim: r,
                    });
                }
            }
        }

        if iter > opts.stall_window {
            let before = gaps[iter - 1 - opts.stall_window];
            if (before - gap).abs() <= opts.stall_rel_change * before {
                if gap >= opts.infeas_tol {
                    return Ok(FeasibilityVerdict::infeasible(
                        InfeasibilityEvidence::GapStall { gap },
                        gap,
                        iter,
                        r,
                    ));
                }
                return Ok(undecided(residual, gap, iter, r));
            }
        }
    }
    Ok(undecided(residual, gap, opts.max_iter, r))
}

fn undecided(residual: f64, gap: f64, iterations: usize, face_dim: usize) -> FeasibilityVerdict {
    FeasibilityVerdict {
        status: FeasibilityStatus::Undecided,
        witness: None,
        certificate: None,
        evidence: None,
        residual,
        gap,
        iterations,
        face_dim,
    }
}

/// Second decomposition of a rank-2 qubit state:
/// `ρ2 = ν1 |φ1><φ1| + ν2 |φ2><φ2|` with `ν1 = 1/<φ1, ρ2⁻¹ φ1>`.
/// Returns `(ν1, ν2, φ2)`, `φ2` with a nonnegative real first component.
pub fn lemma_two_decompositions(rho2: &DensityMatrix, phi1: &[Complex64]) -> Result<(f64, f64, Vec<Complex64>)> {
    if rho2.dim() != 2 || phi1.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: if rho2.dim() != 2 { rho2.dim() } else { phi1.len() },
        });
    }
    let nrm = vec_norm(phi1);
    if nrm == 0.0 {
        return Err(Error::InvalidArgument("phi1 is zero".into()));
    }
    let phi1 = normalized(phi1);
    let eig = herm_eig(rho2.matrix())?;
    if eig.min_eigenvalue() <= 1e-12 {
        return Err(Error::NotPositiveDefinite {
            what: "rho2".into(),
            min_eig: eig.min_eigenvalue(),
        });
    }
    for k in 0..2 {
        if inner(&eig.eigenvector(k), &phi1).norm() > 1.0 - 1e-10 {
            return Err(Error::DegenerateChoice(format!("phi1 is an eigenvector of rho2 (index {k})")));
        }
    }
    let inv = eig.apply(|l| 1.0 / l);
    let nu1 = 1.0 / inv.expectation(&phi1);
    let rem = rho2.matrix() - &ComplexMatrix::projector(&phi1).scale(nu1);
    let reig = herm_eig(&rem.hermitian_part())?;
    let mut phi2 = reig.eigenvector(1);
    let lead = if phi2[0].norm() > 1e-14 { phi2[0] } else { phi2[1] };
    let phase = lead.conj() / lead.norm();
    phi2.iter_mut().for_each(|z| *z *= phase);
    Ok((nu1, 1.0 - nu1, phi2))
}

/// `(z, w)^⊥ = (−w̄, z̄)`.
pub fn perp(v: &[Complex64]) -> Vec<Complex64> {
    vec![-v[1].conj(), v[0].conj()]
}

/// Parameters of the separable no-extension family on `C² ⊗ C² ⊗ C²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleSpec {
    /// Larger eigenvalue of `ρ2 = diag(μ1, 1 − μ1)`, in `[1/2, 1)`.
    pub mu1: f64,
    /// `φ1 = (cos a, sin a)`.
    pub phi1_angle: f64,
    /// `η1 = (1, 0)`, `η2 = (sin δ, cos δ)`; `δ = 0` is orthonormal.
    pub eta_skew: f64,
}

impl Default for CounterexampleSpec {
    fn default() -> Self {
        Self {
            mu1: 0.5,
            phi1_angle: std::f64::consts::FRAC_PI_4,
            eta_skew: 0.0,
        }
    }
}

impl CounterexampleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..1.0).contains(&self.mu1) {
            return Err(Error::InvalidArgument(format!("mu1 must lie in [1/2, 1), got {}", self.mu1)));
        }
        if !(self.eta_skew >= 0.0) || !self.phi1_angle.is_finite() || !self.eta_skew.is_finite() {
            return Err(Error::InvalidArgument("eta_skew must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

fn real2(a: f64, b: f64) -> Vec<Complex64> {
    vec![Complex64::new(a, 0.0), Complex64::new(b, 0.0)]
}

/// Vectors defining a pair `ρ12 = Σ μj |ηj⊗ψj><ηj⊗ψj|`,
/// `ρ23 = Σ νj |φj⊗χj><φj⊗χj|`.
#[derive(Debug, Clone)]
pub struct FourBases {
    pub mu: [f64; 2],
    pub nu: [f64; 2],
    pub eta: [Vec<Complex64>; 2],
    pub psi: [Vec<Complex64>; 2],
    pub phi: [Vec<Complex64>; 2],
    pub chi: [Vec<Complex64>; 2],
}

impl FourBases {
    /// The pair and the eight vectors
    /// `Ψ = η^⊥_a ⊗ ψ_a ⊗ χ_b`, `Φ = η^⊥_a ⊗ φ^⊥_b ⊗ χ_b`.
    pub fn build(&self) -> Result<(CompatiblePair, NullspaceCertificate)> {
        let two = FactorShape::new(vec![2, 2])?;
        let mut m12 = ComplexMatrix::zeros(4, 4);
        let mut m23 = ComplexMatrix::zeros(4, 4);
        for j in 0..2 {
            m12 += &ComplexMatrix::projector(&kron_vec(&self.eta[j], &self.psi[j])).scale(self.mu[j]);
            m23 += &ComplexMatrix::projector(&kron_vec(&self.phi[j], &self.chi[j])).scale(self.nu[j]);
        }
        let rho12 = DensityMatrix::new(m12.hermitian_part(), two.clone())?;
        let rho23 = DensityMatrix::new(m23.hermitian_part(), two)?;
        let pair = CompatiblePair::new(rho12, rho23, crate::states::COMPATIBILITY_TOL)?;

        let mut vectors = Vec::with_capacity(8);
        for a in 0..2 {
            for b in 0..2 {
                vectors.push(ForcedNullVector::new(
                    ForcedBy::Rho12,
                    kron_vec(&perp(&self.eta[a]), &self.psi[a]),
                    self.chi[b].clone(),
                ));
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                vectors.push(ForcedNullVector::new(
                    ForcedBy::Rho23,
                    kron_vec(&perp(&self.phi[b]), &self.chi[b]),
                    perp(&self.eta[a]),
                ));
            }
        }
        Ok((pair, NullspaceCertificate::new(vectors, 8)))
    }
}

/// Separable pair with no common extension, and its certificate.
/// Fails with [`Error::CertificateDegenerate`] when the eight vectors do
/// not span `C⁸`.
pub fn build_counterexample(spec: &CounterexampleSpec) -> Result<(CompatiblePair, NullspaceCertificate)> {
    spec.validate()?;
    let mu = [spec.mu1, 1.0 - spec.mu1];
    let rho2 = DensityMatrix::from_probabilities(&mu, FactorShape::single(2)?)?;
    let phi1 = real2(spec.phi1_angle.cos(), spec.phi1_angle.sin());
    let (nu1, nu2, phi2) = lemma_two_decompositions(&rho2, &phi1)?;
    let (s, c) = spec.eta_skew.sin_cos();
    let bases = FourBases {
        mu,
        nu: [nu1, nu2],
        eta: [real2(1.0, 0.0), real2(s, c)],
        psi: [real2(1.0, 0.0), real2(0.0, 1.0)],
        phi: [phi1, phi2],
        chi: [real2(1.0, 0.0), real2(0.0, 1.0)],
    };
    let (pair, cert) = bases.build()?;
    if !cert.is_complete() {
        return Err(Error::CertificateDegenerate {
            span_dim: cert.span_dim,
            dim: cert.dim,
        });
    }
    Ok((pair, cert))
}

/// Four orthonormal qubit bases with no vector in common (up to phase),
/// `μ = ν = (1/2, 1/2)`: every nonzero spectrum is `{1/2, 1/2}` yet no
/// extension exists.
pub fn build_remark_pair() -> Result<(CompatiblePair, NullspaceCertificate)> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (s8, c8) = (std::f64::consts::PI / 8.0).sin_cos();
    let i = Complex64::new(0.0, h);
    let bases = FourBases {
        mu: [0.5, 0.5],
        nu: [0.5, 0.5],
        eta: [real2(1.0, 0.0), real2(0.0, 1.0)],
        psi: [real2(h, h), real2(h, -h)],
        phi: [vec![Complex64::new(h, 0.0), i], vec![Complex64::new(h, 0.0), -i]],
        chi: [real2(c8, s8), real2(-s8, c8)],
    };
    let (pair, cert) = bases.build()?;
    if !cert.is_complete() {
        return Err(Error::CertificateDegenerate {
            span_dim: cert.span_dim,
            dim: cert.dim,
        });
    }
    Ok((pair, cert))
}

fn spectra_match(a: &DensityMatrix, b: &DensityMatrix, tol: f64) -> bool {
    let (sa, sb) = (a.nonzero_spectrum(), b.nonzero_spectrum());
    sa.len() == sb.len() && sa.iter().zip(&sb).all(|(x, y)| (x - y).abs() <= tol)
}

/// `M (d_a × d_b)` from a vector on `H_a ⊗ H_b` or on `H_b ⊗ H_a`.
fn nearest_on_orbit(psi: &[Complex64], sqrt_rho: &ComplexMatrix, support: &ComplexMatrix, db: usize, kept_first: bool) -> Vec<Complex64> {
    let da = sqrt_rho.rows();
    let m = if kept_first {
        ComplexMatrix::from_fn(da, db, |a, b| psi[a * db + b])
    } else {
        ComplexMatrix::from_fn(da, db, |a, b| psi[b * da + a])
    };
    // Maximize Re Tr(C^† B X) over co-isometries X with C = S M.
    let y = &(&support.adjoint() * sqrt_rho) * &m;
    let yy = (&y * &y.adjoint()).hermitian_part();
    let x = match herm_eig(&yy) {
        Ok(eig) => &eig.apply(|l| if l > 1e-300 { 1.0 / l.sqrt() } else { 0.0 }) * &y,
        Err(_) => y,
    };
    let out = &(sqrt_rho * support) * &x;
    let mut v = vec![Complex64::new(0.0, 0.0); da * db];
    for a in 0..da {
        for b in 0..db {
            let idx = if kept_first { a * db + b } else { b * da + a };
            v[idx] = out[(a, b)];
        }
    }
    v
}

fn orbit_data(rho: &DensityMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let eig = herm_eig(rho.matrix())?;
    let sqrt = eig.apply(|l| l.max(0.0).sqrt());
    let cols: Vec<Vec<Complex64>> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] > crate::states::RANK_TOL)
        .map(|k| eig.eigenvector(k))
        .collect();
    Ok((sqrt, ComplexMatrix::from_columns(&cols)))
}

/// A pure common extension, if one is found. Requires matching nonzero
/// spectra (`ρ12` vs `ρ3`, `ρ23` vs `ρ1`), a `Feasible` solve, and then
/// alternating projections between the two purification orbits seeded
/// from the witness's leading eigenvector.
pub fn common_purification(pair: &CompatiblePair) -> Result<Option<Vec<Complex64>>> {
    if !spectra_match(pair.rho12(), &pair.rho3(), 1e-9) || !spectra_match(pair.rho23(), &pair.rho1(), 1e-9) {
        return Ok(None);
    }
    let verdict = solve(pair, &SolveOptions::default())?;
    let Some(witness) = verdict.witness else {
        return Ok(None);
    };
    let (d1, _, d3) = pair.dims();
    let (s12, b12) = orbit_data(pair.rho12())?;
    let (s23, b23) = orbit_data(pair.rho23())?;
    let pure_residual = |psi: &[Complex64]| -> Result<f64> { marginal_residual(&ComplexMatrix::projector(psi), pair) };

    let eig = herm_eig(witness.matrix())?;
    let mut psi = eig.eigenvector(eig.eigenvalues.len() - 1);
    for _ in 0..2000 {
        if pure_residual(&psi)? <= 1e-8 {
            return Ok(Some(psi));
        }
        let a = nearest_on_orbit(&psi, &s12, &b12, d3, true);
        psi = nearest_on_orbit(&a, &s23, &b23, d1, false);
        let nrm = vec_norm(&psi);
        if nrm == 0.0 {
            break;
        }
        psi.iter_mut().for_each(|z| *z /= nrm);
    }
    Ok(None)
}

/// `true` iff a pure common extension is found; see
/// [`common_purification`].
pub fn common_purification_check(pair: &CompatiblePair) -> bool {
    matches!(common_purification(pair), Ok(Some(_)))
}

/// `ρ12 ⊗ ρ3`-style helper: the product of a bipartite state with a
/// single-factor state.
pub fn append_factor(rho12: &DensityMatrix, rho3: &DensityMatrix) -> DensityMatrix {
    let m = kron(rho12.matrix(), rho3.matrix());
    let mut dims = rho12.shape().dims().to_vec();
    dims.extend_from_slice(rho3.shape().dims());
    DensityMatrix::from_parts_unchecked(m, FactorShape::new(dims).expect("positive dims"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{check_compatible_default, entropy_report};
    use crate::states::{pure_coupling, random_density, random_density_shaped};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape(d: &[usize]) -> FactorShape {
        FactorShape::new(d.to_vec()).unwrap()
    }

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        m.hermitian_part()
    }

    #[test]
    fn coordinates_are_isometric() {
        let h = random_hermitian(5, 1);
        let x = herm_to_coords(&h);
        assert_eq!(x.len(), 25);
        assert!((norm2(&x) - h.frobenius_norm()).abs() < 1e-13);
        assert!((&coords_to_herm(&x, 5) - &h).max_abs() < 1e-15);
    }

    #[test]
    fn psd_projection_examples() {
        let d = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
        assert!((&project_psd(&d).unwrap() - &ComplexMatrix::from_real_diag(&[1.0, 0.0])).max_abs() < 1e-15);
        let p = random_density(4, 4, 3).unwrap();
        assert!((&project_psd(p.matrix()).unwrap() - p.matrix()).max_abs() < 1e-12);
    }

    #[test]
    fn psd_projection_is_nearest() {
        let a = random_hermitian(4, 9);
        let pa = project_psd(&a).unwrap();
        assert!(herm_eig(&pa).unwrap().min_eigenvalue() >= -1e-14);
        let best = (&a - &pa).frobenius_norm();
        for seed in 0..100 {
            let x = random_density(4, 1 + (seed as usize % 4), seed).unwrap();
            let x = x.matrix().scale(1.0 + seed as f64 * 0.05);
            assert!(best <= (&a - &x).frobenius_norm() + 1e-12);
        }
    }

    fn product_pair(seed: u64) -> CompatiblePair {
        let r1 = random_density(2, 2, seed).unwrap();
        let r2 = random_density(2, 2, seed + 1).unwrap();
        let r3 = random_density(2, 2, seed + 2).unwrap();
        check_compatible_default(r1.tensor(&r2), r2.tensor(&r3)).unwrap()
    }

    #[test]
    fn affine_projection_properties() {
        let pair = product_pair(1);
        let ext = pair.rho1().tensor(pair.rho2()).tensor(&pair.rho3());
        let fixed = project_marginal_affine(ext.matrix(), &pair).unwrap();
        assert!((&fixed - ext.matrix()).max_abs() < 1e-11);

        let x = random_hermitian(8, 5);
        let px = project_marginal_affine(&x, &pair).unwrap();
        assert!(marginal_residual(&px, &pair).unwrap() < 1e-10);
        let ppx = project_marginal_affine(&px, &pair).unwrap();
        assert!((&ppx - &px).max_abs() < 1e-11);
        // Orthogonality: X − P(X) is orthogonal to differences within the set.
        let d = &ext.matrix().clone() - &px;
        assert!((&x - &px).frobenius_dot(&d).abs() < 1e-10);

        assert!(matches!(
            project_marginal_affine(&ComplexMatrix::identity(4), &pair),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn affine_projection_restores_perturbed_extension() {
        let pair = product_pair(11);
        let ext = pair.rho1().tensor(pair.rho2()).tensor(&pair.rho3());
        let pert = kron(&random_hermitian(4, 3), &ComplexMatrix::identity(2)).scale(1e-3);
        let out = project_marginal_affine(&(ext.matrix() + &pert), &pair).unwrap();
        assert!(marginal_residual(&out, &pair).unwrap() < 1e-10);
    }

    #[test]
    fn product_pair_is_feasible() {
        let pair = product_pair(21);
        let v = solve(&pair, &SolveOptions::default()).unwrap();
        assert_eq!(v.status, FeasibilityStatus::Feasible);
        let w = v.witness.unwrap();
        assert!(marginal_residual(w.matrix(), &pair).unwrap() <= 1e-9);
        assert!(w.min_eigenvalue() >= -1e-9);
    }

    #[test]
    fn pure_entangled_with_product_is_feasible() {
        let a = random_density(2, 2, 3).unwrap();
        let rho12 = pure_coupling(&a, &a.clone()).unwrap();
        let rho2 = rho12.marginal(&[1]).unwrap();
        let rho3 = random_density(3, 3, 5).unwrap();
        let pair = check_compatible_default(rho12.clone(), rho2.tensor(&rho3)).unwrap();
        let v = solve(&pair, &SolveOptions::default()).unwrap();
        assert_eq!(v.status, FeasibilityStatus::Feasible);
        let want = append_factor(&rho12, &rho3);
        assert!((v.witness.unwrap().matrix() - want.matrix()).max_abs() < 1e-8);
    }

    #[test]
    fn lemma_examples() {
        let half = DensityMatrix::maximally_mixed(shape(&[2]));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (n1, n2, p2) = lemma_two_decompositions(&half, &real2(h, h)).unwrap();
        assert!((n1 - 0.5).abs() < 1e-14 && (n2 - 0.5).abs() < 1e-14);
        assert!((p2[0] - h).norm() < 1e-12 && (p2[1] + h).norm() < 1e-12);

        let rho = DensityMatrix::from_probabilities(&[0.7, 0.3], shape(&[2])).unwrap();
        let (n1, n2, p2) = lemma_two_decompositions(&rho, &real2(h, h)).unwrap();
        assert!((n1 - 0.42).abs() < 1e-14);
        // Determinant-root oracle: det(ρ2 − ν1 |φ1><φ1|) = 0.
        let det = (0.7 - 0.5 * n1) * (0.3 - 0.5 * n1) - 0.25 * n1 * n1;
        assert!(det.abs() < 1e-14);
        let rebuilt = &ComplexMatrix::projector(&real2(h, h)).scale(n1) + &ComplexMatrix::projector(&p2).scale(n2);
        assert!((&rebuilt - rho.matrix()).max_abs() < 1e-12);

        assert!(matches!(
            lemma_two_decompositions(&rho, &real2(1.0, 0.0)),
            Err(Error::DegenerateChoice(_))
        ));
    }

    #[test]
    fn counterexample_default() {
        let (pair, cert) = build_counterexample(&CounterexampleSpec::default()).unwrap();
        assert_eq!(cert.span_dim, 8);
        assert!(verify_certificate(&pair, &cert));
        assert!(!verify_certificate(&pair, &cert.without(3)));
        assert!(entropy_report(&pair).slack_pol.abs() < 1e-9);
        let v = solve(&pair, &SolveOptions::default()).unwrap();
        assert_eq!(v.status, FeasibilityStatus::Infeasible);
        assert!(verify_certificate(&pair, v.certificate.as_ref().unwrap()));
    }

    #[test]
    fn counterexample_variants() {
        let spec = CounterexampleSpec {
            mu1: 0.6,
            ..Default::default()
        };
        let (pair, cert) = build_counterexample(&spec).unwrap();
        assert_eq!(cert.span_dim, 8);
        assert!(entropy_report(&pair).slack_pol.abs() < 1e-9);

        let spec = CounterexampleSpec {
            eta_skew: 0.1,
            ..Default::default()
        };
        let (pair, cert) = build_counterexample(&spec).unwrap();
        assert_eq!(cert.span_dim, 8);
        assert!(entropy_report(&pair).slack_pol > 1e-4);

        let spec = CounterexampleSpec {
            eta_skew: std::f64::consts::FRAC_PI_2,
            ..Default::default()
        };
        assert!(matches!(
            build_counterexample(&spec),
            Err(Error::CertificateDegenerate { .. })
        ));
    }

    #[test]
    fn certificate_rejected_for_extendable_pair() {
        let (_, cert) = build_counterexample(&CounterexampleSpec::default()).unwrap();
        let pair = product_pair(2);
        assert!(!verify_certificate(&pair, &cert));
    }

    #[test]
    fn remark_pair() {
        let (pair, cert) = build_remark_pair().unwrap();
        assert!(verify_certificate(&pair, &cert));
        for s in [pair.rho12().nonzero_spectrum(), pair.rho1().nonzero_spectrum(), pair.rho3().nonzero_spectrum()] {
            assert_eq!(s.len(), 2);
            assert!(s.iter().all(|x| (x - 0.5).abs() < 1e-12));
        }
        assert_eq!(solve(&pair, &SolveOptions::default()).unwrap().status, FeasibilityStatus::Infeasible);
        assert!(!common_purification_check(&pair));
    }

    #[test]
    fn purification_examples() {
        let a = random_density(2, 2, 7).unwrap();
        let rho12 = pure_coupling(&a, &a.clone()).unwrap();
        let rho3 = random_density(2, 1, 8).unwrap();
        let pair = check_compatible_default(rho12.clone(), rho12.marginal(&[1]).unwrap().tensor(&rho3)).unwrap();
        assert!(common_purification_check(&pair));

        let mixed12 = random_density_shaped(shape(&[2, 2]), 4, 1).unwrap();
        let rho2 = mixed12.marginal(&[1]).unwrap();
        let generic = check_compatible_default(mixed12, rho2.tensor(&random_density(2, 2, 2).unwrap())).unwrap();
        assert!(!common_purification_check(&generic));
    }
}
