//! Density matrices tagged with a tensor-factor shape.
//!
//! Entropies are in nats (natural log); every inequality used by the crate
//! is invariant under the choice of base.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matcore::{
    self, herm_eig, inner, kron, partial_trace, trace_norm, vec_norm, ComplexMatrix, FactorShape,
    HERMITIAN_TOL,
};
use crate::{Error, Result};

/// Default validation tolerance for Hermiticity, trace and PSD-ness.
pub const STATE_TOL: f64 = 1e-10;

/// Eigenvalues below this count as zero in entropy sums.
pub const ENTROPY_ZERO: f64 = 1e-14;

/// Eigenvalues at or above this count toward rank.
pub const RANK_TOL: f64 = 1e-12;

/// Hermitian, positive semidefinite, unit-trace matrix with factor shape.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    shape: FactorShape,
}

impl DensityMatrix {
    /// Validates with the default tolerance [`STATE_TOL`].
    pub fn new(mat: ComplexMatrix, shape: FactorShape) -> Result<Self> {
        Self::with_tolerance(mat, shape, STATE_TOL)
    }

    /// Validates Hermiticity, unit trace and `λ_min ≥ -tol`. Slightly
    /// negative spectra are clipped to zero and the result renormalized.
    pub fn with_tolerance(mat: ComplexMatrix, shape: FactorShape, tol: f64) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::NotSquare {
                rows: mat.rows(),
                cols: mat.cols(),
            });
        }
        if mat.rows() != shape.total() {
            return Err(Error::ShapeMismatch(format!(
                "matrix side {} does not match factor shape {:?}",
                mat.rows(),
                shape.dims()
            )));
        }
        let asym = mat.max_asymmetry();
        if asym > tol.max(HERMITIAN_TOL) {
            return Err(Error::NotHermitian(asym));
        }
        let mat = mat.hermitian_part();
        let tr = mat.trace().re;
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvalidTrace(tr));
        }
        let eig = herm_eig(&mat)?;
        let min_eig = eig.min_eigenvalue();
        if min_eig < -tol {
            return Err(Error::NotPsd(min_eig));
        }
        let mat = if min_eig < 0.0 {
            let clipped = eig.apply(|l| l.max(0.0));
            let t = clipped.trace().re;
            clipped.scale(1.0 / t)
        } else {
            mat
        };
        Ok(Self { mat, shape })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_parts_unchecked(mat: ComplexMatrix, shape: FactorShape) -> Self {
        Self { mat, shape }
    }

    /// `|ψ><ψ| / <ψ|ψ>`.
    pub fn from_pure(psi: &[Complex64], shape: FactorShape) -> Result<Self> {
        let n = vec_norm(psi);
        if n == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let psi: Vec<Complex64> = psi.iter().map(|z| z / n).collect();
        Self::new(ComplexMatrix::projector(&psi), shape)
    }

    pub fn maximally_mixed(shape: FactorShape) -> Self {
        let d = shape.total();
        Self {
            mat: ComplexMatrix::identity(d).scale(1.0 / d as f64),
            shape,
        }
    }

    /// Diagonal state from a probability vector.
    pub fn from_probabilities(probs: &[f64], shape: FactorShape) -> Result<Self> {
        Self::new(ComplexMatrix::from_real_diag(probs), shape)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn shape(&self) -> &FactorShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    /// Same matrix under a different factorization of the same total.
    pub fn reshaped(&self, shape: FactorShape) -> Result<Self> {
        if shape.total() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape dimension {} to {:?}",
                self.dim(),
                shape.dims()
            )));
        }
        Ok(Self {
            mat: self.mat.clone(),
            shape,
        })
    }

    /// Reduced state on the listed factors.
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mat = partial_trace(&self.mat, &self.shape, &keep)?.hermitian_part();
        let shape = if keep.is_empty() {
            FactorShape::single(1)?
        } else {
            self.shape.select(&keep)?
        };
        Ok(Self { mat, shape })
    }

    /// `self ⊗ other` with concatenated factor shape.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.shape.dims().to_vec();
        dims.extend_from_slice(other.shape.dims());
        Self {
            mat: kron(&self.mat, &other.mat),
            shape: FactorShape::new(dims).expect("dims are positive"),
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        herm_eig(&self.mat).expect("density matrix is Hermitian").eigenvalues
    }

    /// Nonzero (`≥ RANK_TOL`) eigenvalues, descending.
    pub fn nonzero_spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.eigenvalues().into_iter().filter(|&l| l >= RANK_TOL).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn rank(&self) -> usize {
        self.nonzero_spectrum().len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.mat.frobenius_norm().powi(2)
    }

    /// Trace norm of the difference, `‖ρ − σ‖₁`.
    pub fn trace_norm_distance(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        trace_norm(&(&self.mat - &other.mat))
    }
}

/// Von Neumann entropy `−Σ λ ln λ`, with eigenvalues below
/// [`ENTROPY_ZERO`] treated as zero.
pub fn entropy(rho: &DensityMatrix) -> f64 {
    shannon_entropy(&rho.eigenvalues())
}

/// `−Σ p ln p` with the `0 ln 0 = 0` convention.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > ENTROPY_ZERO)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Middle-marginal agreement tolerance used by [`CompatiblePair::new`]
/// when the caller does not pick one.
pub const COMPATIBILITY_TOL: f64 = 1e-9;

/// A pair `(ρ12, ρ23)` whose `H2` marginals agree.
#[derive(Debug, Clone)]
pub struct CompatiblePair {
    rho12: DensityMatrix,
    rho23: DensityMatrix,
    rho2: DensityMatrix,
    distance: f64,
}

impl CompatiblePair {
    /// Accepts the pair when `‖Tr1 ρ12 − Tr3 ρ23‖₁ ≤ tol`. Both inputs must
    /// be bipartite; the stored `ρ2` is the average of the two marginals.
    pub fn new(rho12: DensityMatrix, rho23: DensityMatrix, tol: f64) -> Result<Self> {
        let (s12, s23) = (rho12.shape().dims(), rho23.shape().dims());
        if s12.len() != 2 || s23.len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "expected bipartite shapes, got {s12:?} and {s23:?}"
            )));
        }
        if s12[1] != s23[0] {
            return Err(Error::ShapeMismatch(format!(
                "middle dimensions differ: {} vs {}",
                s12[1], s23[0]
            )));
        }
        let from12 = rho12.marginal(&[1])?;
        let from23 = rho23.marginal(&[0])?;
        let distance = from12.trace_norm_distance(&from23)?;
        if distance > tol {
            return Err(Error::Incompatible { distance });
        }
        let avg = (&from12.mat + &from23.mat).scale(0.5).hermitian_part();
        let rho2 = DensityMatrix::from_parts_unchecked(avg, from12.shape.clone());
        Ok(Self {
            rho12,
            rho23,
            rho2,
            distance,
        })
    }

    pub fn rho12(&self) -> &DensityMatrix {
        &self.rho12
    }

    pub fn rho23(&self) -> &DensityMatrix {
        &self.rho23
    }

    /// The agreed middle marginal.
    pub fn rho2(&self) -> &DensityMatrix {
        &self.rho2
    }

    pub fn rho1(&self) -> DensityMatrix {
        self.rho12.marginal(&[0]).expect("bipartite")
    }

    pub fn rho3(&self) -> DensityMatrix {
        self.rho23.marginal(&[1]).expect("bipartite")
    }

    /// Trace-norm distance between the two middle marginals.
    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// `(d1, d2, d3)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let a = self.rho12.shape().dims();
        let b = self.rho23.shape().dims();
        (a[0], a[1], b[1])
    }

    pub fn shape123(&self) -> FactorShape {
        let (d1, d2, d3) = self.dims();
        FactorShape::new(vec![d1, d2, d3]).expect("positive dims")
    }
}

/// Pure state on `(d1, d2)` whose marginals are `rho1` and `rho2`.
///
/// Built in Schmidt form `Ψ = Σ_k √μ_k u_k ⊗ v_k` from eigenvectors of the
/// two inputs, matched by position after sorting both nonzero spectra in
/// descending order.
pub fn pure_coupling(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<DensityMatrix> {
    let e1 = herm_eig(rho1.matrix())?;
    let e2 = herm_eig(rho2.matrix())?;
    let nz = |e: &matcore::HermitianEig| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..e.eigenvalues.len())
            .filter(|&k| e.eigenvalues[k] >= RANK_TOL)
            .collect();
        idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
        idx
    };
    let (i1, i2) = (nz(&e1), nz(&e2));
    if i1.len() != i2.len() {
        return Err(Error::SpectraMismatch(format!(
            "ranks differ: {} vs {}",
            i1.len(),
            i2.len()
        )));
    }
    for (&a, &b) in i1.iter().zip(&i2) {
        let (la, lb) = (e1.eigenvalues[a], e2.eigenvalues[b]);
        if (la - lb).abs() > 1e-9 {
            return Err(Error::SpectraMismatch(format!("eigenvalue {la} vs {lb}")));
        }
    }
    let (d1, d2) = (rho1.dim(), rho2.dim());
    let mut psi = vec![Complex64::new(0.0, 0.0); d1 * d2];
    for (&a, &b) in i1.iter().zip(&i2) {
        let mu = 0.5 * (e1.eigenvalues[a] + e2.eigenvalues[b]);
        let term = matcore::kron_vec(&e1.eigenvector(a), &e2.eigenvector(b));
        for (p, t) in psi.iter_mut().zip(term) {
            *p += t * mu.sqrt();
        }
    }
    let shape = FactorShape::new(vec![d1, d2])?;
    DensityMatrix::from_pure(&psi, shape)
}

/// Pure state on `(d, ancilla_dim)` whose first marginal is `rho`.
pub fn purify(rho: &DensityMatrix, ancilla_dim: usize) -> Result<DensityMatrix> {
    let eig = herm_eig(rho.matrix())?;
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] >= RANK_TOL)
        .collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    if idx.len() > ancilla_dim {
        return Err(Error::AncillaTooSmall {
            ancilla: ancilla_dim,
            rank: idx.len(),
        });
    }
    let d = rho.dim();
    let mut psi = vec![Complex64::new(0.0, 0.0); d * ancilla_dim];
    for (slot, &k) in idx.iter().enumerate() {
        let amp = eig.eigenvalues[k].sqrt();
        let u = eig.eigenvector(k);
        for i in 0..d {
            psi[i * ancilla_dim + slot] += u[i] * amp;
        }
    }
    DensityMatrix::from_pure(&psi, FactorShape::new(vec![d, ancilla_dim])?)
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ginibre-distributed state `G G^† / Tr` with `G` of size `dim × rank`
/// filled from a ChaCha8 stream seeded by `seed`.
pub fn random_density(dim: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    random_density_shaped(FactorShape::single(dim)?, rank, seed)
}

/// [`random_density`] with an explicit factor shape.
pub fn random_density_shaped(shape: FactorShape, rank: usize, seed: u64) -> Result<DensityMatrix> {
    let dim = shape.total();
    if rank == 0 || rank > dim {
        return Err(Error::InvalidArgument(format!(
            "rank must lie in 1..={dim}, got {rank}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = ComplexMatrix::from_fn(dim, rank, |_, _| complex_gaussian(&mut rng));
    let ggt = &g * &g.adjoint();
    let t = ggt.trace().re;
    Ok(DensityMatrix::from_parts_unchecked(
        ggt.scale(1.0 / t).hermitian_part(),
        shape,
    ))
}

/// Haar-random unitary via Gram-Schmidt on a complex Ginibre matrix.
pub fn random_unitary(dim: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<Complex64> = (0..dim).map(|_| complex_gaussian(&mut rng)).collect();
        for _ in 0..2 {
            for b in &cols {
                let c = inner(b, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let n = vec_norm(&v);
        if n > 1e-8 {
            cols.push(v.iter().map(|z| z / n).collect());
        }
    }
    ComplexMatrix::from_columns(&cols)
}

/// `U ρ U^†` keeping the shape.
pub fn conjugate(rho: &DensityMatrix, u: &ComplexMatrix) -> DensityMatrix {
    let m = &(u * rho.matrix()) * &u.adjoint();
    DensityMatrix::from_parts_unchecked(m.hermitian_part(), rho.shape().clone())
}

/// Exchanges the two factors of a bipartite state.
pub fn swap_factors(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let dims = rho.shape().dims();
    if dims.len() != 2 {
        return Err(Error::ShapeMismatch(format!("expected two factors, got {dims:?}")));
    }
    let (a, b) = (dims[0], dims[1]);
    let m = rho.matrix();
    let swapped = ComplexMatrix::from_fn(a * b, a * b, |r, c| {
        let (r2, r1) = (r / a, r % a);
        let (c2, c1) = (c / a, c % a);
        m[(r1 * b + r2, c1 * b + c2)]
    });
    Ok(DensityMatrix::from_parts_unchecked(swapped, FactorShape::new(vec![b, a])?))
}

/// Convex combination `Σ w_i ρ_i` of equally shaped states.
pub fn mixture(weights: &[f64], states: &[&DensityMatrix]) -> Result<DensityMatrix> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
    let mut acc = ComplexMatrix::zeros(first.dim(), first.dim());
    for (&w, s) in weights.iter().zip(states) {
        if s.shape() != first.shape() {
            return Err(Error::ShapeMismatch("mixture components differ in shape".into()));
        }
        acc += &s.matrix().scale(w);
    }
    DensityMatrix::new(acc, first.shape().clone())
}

/// `(T ⊗ I) σ (T ⊗ I)^†` with `T = τ^{1/2} σ_A^{-1/2}`, which moves the
/// first-factor marginal of a bipartite `σ` to `target` while keeping the
/// same support structure on the second factor. `σ_A` must be full rank.
pub fn retarget_first_marginal(sigma: &DensityMatrix, target: &DensityMatrix) -> Result<DensityMatrix> {
    let dims = sigma.shape().dims();
    if dims.len() != 2 || dims[0] != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "cannot retarget shape {dims:?} to a {}-dimensional marginal",
            target.dim()
        )));
    }
    let marg = sigma.marginal(&[0])?;
    let eig = herm_eig(marg.matrix())?;
    if eig.min_eigenvalue() <= RANK_TOL {
        return Err(Error::NotPositiveDefinite {
            what: "first marginal".into(),
            min_eig: eig.min_eigenvalue(),
        });
    }
    let t = &matcore::matrix_sqrt(target.matrix())? * &eig.apply(|l| 1.0 / l.sqrt());
    let big = kron(&t, &ComplexMatrix::identity(dims[1]));
    let m = &(&big * sigma.matrix()) * &big.adjoint();
    DensityMatrix::new(m.hermitian_part(), sigma.shape().clone())
}

/// Random compatible pair on `d1 × d2 × d3`: Ginibre `ρ12` of the given
/// rank and a Ginibre `σ23` retargeted so that `Tr3 ρ23 = Tr1 ρ12`.
/// Such pairs need not have a common extension.
pub fn random_compatible_pair(dims: (usize, usize, usize), rank12: usize, rank23: usize, seed: u64) -> Result<CompatiblePair> {
    let (d1, d2, d3) = dims;
    let rho12 = random_density_shaped(FactorShape::new(vec![d1, d2])?, rank12, seed)?;
    let sigma = random_density_shaped(FactorShape::new(vec![d2, d3])?, rank23, seed.wrapping_add(0x9e37_79b9))?;
    let rho23 = retarget_first_marginal(&sigma, &rho12.marginal(&[1])?)?;
    CompatiblePair::new(rho12, rho23, COMPATIBILITY_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(d: usize) -> FactorShape {
        FactorShape::single(d).unwrap()
    }

    #[test]
    fn random_compatible_pairs_agree() {
        for seed in 0..5 {
            let pair = random_compatible_pair((2, 3, 2), 6, 6, seed).unwrap();
            assert!(pair.distance() < 1e-12);
        }
        let pair = random_compatible_pair((2, 2, 3), 4, 2, 9).unwrap();
        assert_eq!(pair.rho23().rank(), 2);
    }

    #[test]
    fn entropy_examples() {
        let pure = DensityMatrix::from_probabilities(&[1.0, 0.0], single(2)).unwrap();
        assert_eq!(pure.entropy(), 0.0);
        let mixed = DensityMatrix::maximally_mixed(single(2));
        assert!((mixed.entropy() - 2f64.ln()).abs() < 1e-15);
        let d = DensityMatrix::from_probabilities(&[0.3, 0.7], single(2)).unwrap();
        let oracle = -0.3 * 0.3f64.ln() - 0.7 * 0.7f64.ln();
        assert!((d.entropy() - oracle).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_and_clips() {
        let bad_trace = ComplexMatrix::from_real_diag(&[0.5, 0.6]);
        assert!(matches!(DensityMatrix::new(bad_trace, single(2)), Err(Error::InvalidTrace(_))));
        let neg = ComplexMatrix::from_real_diag(&[1.1, -0.1]);
        assert!(matches!(DensityMatrix::new(neg, single(2)), Err(Error::NotPsd(_))));
        let tiny = ComplexMatrix::from_real_diag(&[1.0 + 5e-11, -5e-11]);
        let clipped = DensityMatrix::new(tiny, single(2)).unwrap();
        assert!(clipped.min_eigenvalue() >= 0.0);
        assert!((clipped.matrix().trace().re - 1.0).abs() < 1e-15);
        let wrong_shape = DensityMatrix::new(ComplexMatrix::identity(2).scale(0.5), single(3));
        assert!(matches!(wrong_shape, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn pure_coupling_examples() {
        let half = DensityMatrix::maximally_mixed(single(2));
        let bell = pure_coupling(&half, &half).unwrap();
        assert!(bell.entropy().abs() < 1e-12);
        assert!(bell.marginal(&[0]).unwrap().trace_norm_distance(&half).unwrap() < 1e-12);
        assert!(bell.marginal(&[1]).unwrap().trace_norm_distance(&half).unwrap() < 1e-12);

        let zero = DensityMatrix::from_probabilities(&[1.0, 0.0], single(2)).unwrap();
        let prod = pure_coupling(&zero, &zero).unwrap();
        assert!((prod.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);

        let r1 = DensityMatrix::from_probabilities(&[0.3, 0.7], single(2)).unwrap();
        let r2 = conjugate(&r1, &random_unitary(2, 99));
        let psi = pure_coupling(&r1, &r2).unwrap();
        assert!(psi.marginal(&[0]).unwrap().trace_norm_distance(&r1).unwrap() < 1e-9);
        assert!(psi.marginal(&[1]).unwrap().trace_norm_distance(&r2).unwrap() < 1e-9);
    }

    #[test]
    fn pure_coupling_rejects_mismatch() {
        let a = DensityMatrix::from_probabilities(&[0.3, 0.7], single(2)).unwrap();
        let b = DensityMatrix::from_probabilities(&[0.4, 0.6], single(2)).unwrap();
        assert!(matches!(pure_coupling(&a, &b), Err(Error::SpectraMismatch(_))));
        let c = DensityMatrix::from_probabilities(&[1.0, 0.0], single(2)).unwrap();
        assert!(matches!(pure_coupling(&a, &c), Err(Error::SpectraMismatch(_))));
    }

    #[test]
    fn purify_examples() {
        let zero = DensityMatrix::from_probabilities(&[1.0, 0.0], single(2)).unwrap();
        let p = purify(&zero, 1).unwrap();
        assert_eq!(p.shape().dims(), &[2, 1]);
        assert!(p.trace_norm_distance(&zero.reshaped(p.shape().clone()).unwrap()).unwrap() < 1e-15);

        let half = DensityMatrix::maximally_mixed(single(2));
        let p = purify(&half, 2).unwrap();
        assert!(p.entropy().abs() < 1e-12);
        assert!((p.marginal(&[1]).unwrap().entropy() - 2f64.ln()).abs() < 1e-12);

        let d = DensityMatrix::from_probabilities(&[0.2, 0.3, 0.5], single(3)).unwrap();
        let p = purify(&d, 3).unwrap();
        let back = p.marginal(&[0]).unwrap();
        assert!((back.matrix() - d.matrix()).max_abs() < 1e-12);
        assert!(matches!(purify(&d, 2), Err(Error::AncillaTooSmall { ancilla: 2, rank: 3 })));
    }

    #[test]
    fn random_density_properties() {
        let pure = random_density(3, 1, 1).unwrap();
        assert!(pure.entropy().abs() < 1e-12);
        assert_eq!(pure.rank(), 1);
        let a = random_density(2, 2, 1).unwrap();
        let b = random_density(2, 2, 2).unwrap();
        assert!(a.trace_norm_distance(&b).unwrap() > 0.0);
        assert_eq!(random_density(2, 2, 1).unwrap(), a);
        assert!(random_density(2, 3, 0).is_err());
    }

    #[test]
    fn random_density_mean_is_maximally_mixed() {
        // Monte-Carlo oracle: E[GG^†/Tr] = I/d by unitary invariance.
        let mut acc = ComplexMatrix::zeros(2, 2);
        for seed in 0..1000 {
            acc += random_density(2, 2, seed).unwrap().matrix();
        }
        let mean = acc.scale(1e-3);
        let diff = &mean - &ComplexMatrix::identity(2).scale(0.5);
        assert!(trace_norm(&diff).unwrap() < 0.05);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let u = random_unitary(4, 3);
        assert!((&(&u.adjoint() * &u) - &ComplexMatrix::identity(4)).max_abs() < 1e-12);
    }

    #[test]
    fn compatible_pair_rejects_shapes() {
        let a = random_density_shaped(FactorShape::new(vec![2, 2]).unwrap(), 4, 1).unwrap();
        let b = random_density_shaped(FactorShape::new(vec![3, 2]).unwrap(), 6, 2).unwrap();
        assert!(matches!(CompatiblePair::new(a, b, 1e-9), Err(Error::ShapeMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn entropy_is_additive(s1 in 0u64..10_000, s2 in 0u64..10_000, r1 in 1usize..=2, r2 in 1usize..=3) {
            let a = random_density(2, r1, s1).unwrap();
            let b = random_density(3, r2, s2).unwrap();
            let joint = a.tensor(&b);
            prop_assert!((joint.entropy() - a.entropy() - b.entropy()).abs() < 1e-9);
        }

        #[test]
        fn araki_lieb_and_subadditivity(seed in 0u64..100_000, rank in 1usize..=6) {
            let rho = random_density_shaped(FactorShape::new(vec![2, 3]).unwrap(), rank, seed).unwrap();
            let s12 = rho.entropy();
            let s1 = rho.marginal(&[0]).unwrap().entropy();
            let s2 = rho.marginal(&[1]).unwrap().entropy();
            prop_assert!(s12 >= (s1 - s2).abs() - 1e-9);
            prop_assert!(s12 <= s1 + s2 + 1e-9);
        }

        #[test]
        fn pure_coupling_is_pure(seed in 0u64..100_000) {
            let r1 = random_density(3, 2, seed).unwrap();
            let r2 = conjugate(&r1, &random_unitary(3, seed ^ 0xabc));
            let psi = pure_coupling(&r1, &r2).unwrap();
            prop_assert!(psi.entropy().abs() < 1e-9);
        }
    }
}
