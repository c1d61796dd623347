//! Explicit extension constructions.
//!
//! - Classical conditioning `p123 = p12 · p23 / p2` and its chain form,
//!   the maximum-entropy extension of consistent classical marginals.
//! - The Golden-Thompson candidate `R = exp(log ρ12 + log ρ23 − log ρ2)`,
//!   Hermitian and positive but with `Tr R ≤ 1` in general.
//! - Matched separable ensembles, extended term by term.
//! - The perturbation formula that carries a positive definite extension
//!   over to a nearby compatible pair.
//! - States saturating `S12 = S1 − S2`.

use num_complex::Complex64;

use crate::matcore::{kron, kron_all, matrix_exp, matrix_log, partial_trace, ComplexMatrix, FactorShape};
use crate::states::{CompatiblePair, DensityMatrix};
use crate::{Error, Result};

/// `p2(y)` at or below this is a zero fiber.
pub const ZERO_FIBER: f64 = 1e-14;

/// Allowed disagreement between classical middle marginals.
pub const CLASSICAL_MARGINAL_TOL: f64 = 1e-12;

/// Probability table over a finite product space, row-major like
/// [`FactorShape`] composite indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalJoint {
    shape: FactorShape,
    probs: Vec<f64>,
}

impl ClassicalJoint {
    pub fn new(shape: FactorShape, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != shape.total() {
            return Err(Error::InvalidDistribution(format!(
                "{} probabilities for shape {:?}",
                probs.len(),
                shape.dims()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("negative or non-finite entry {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Self { shape, probs })
    }

    pub fn shape(&self) -> &FactorShape {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Marginal on the listed factors (any order; output in original order).
    pub fn marginal(&self, keep: &[usize]) -> Result<ClassicalJoint> {
        let dims = self.shape.dims();
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let out_shape = self.shape.select(&keep)?;
        let mut out = vec![0.0; out_shape.total()];
        let mut digits = vec![0usize; dims.len()];
        for &p in &self.probs {
            let idx = keep.iter().fold(0, |acc, &f| acc * dims[f] + digits[f]);
            out[idx] += p;
            for f in (0..dims.len()).rev() {
                digits[f] += 1;
                if digits[f] < dims[f] {
                    break;
                }
                digits[f] = 0;
            }
        }
        Ok(Self {
            shape: out_shape,
            probs: out,
        })
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        crate::states::shannon_entropy(&self.probs)
    }

    /// Diagonal density matrix with the same shape.
    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_parts_unchecked(ComplexMatrix::from_real_diag(&self.probs), self.shape.clone())
    }

    fn require_bipartite(&self) -> Result<(usize, usize)> {
        match self.shape.dims() {
            [a, b] => Ok((*a, *b)),
            d => Err(Error::ShapeMismatch(format!("expected two factors, got {d:?}"))),
        }
    }
}

/// Maximum-entropy extension `p123(x,y,z) = p12(x,y) p23(y,z) / p2(y)`,
/// zero on fibers where `p2(y) ≤ 1e-14`.
pub fn classical_extension(p12: &ClassicalJoint, p23: &ClassicalJoint) -> Result<ClassicalJoint> {
    extend_by_conditioning(p12, p23, 0)
}

fn extend_by_conditioning(p12: &ClassicalJoint, p23: &ClassicalJoint, position: usize) -> Result<ClassicalJoint> {
    let (d1, d2) = p12.require_bipartite()?;
    let (e2, d3) = p23.require_bipartite()?;
    if d2 != e2 {
        return Err(Error::ShapeMismatch(format!("middle alphabets differ: {d2} vs {e2}")));
    }
    let left: Vec<f64> = (0..d2).map(|y| (0..d1).map(|x| p12.probs[x * d2 + y]).sum()).collect();
    let right: Vec<f64> = (0..d2).map(|y| (0..d3).map(|z| p23.probs[y * d3 + z]).sum()).collect();
    let deviation = left
        .iter()
        .zip(&right)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if deviation > CLASSICAL_MARGINAL_TOL {
        return Err(Error::IncompatibleMarginals { position, deviation });
    }
    let mut probs = vec![0.0; d1 * d2 * d3];
    for y in 0..d2 {
        let p2 = 0.5 * (left[y] + right[y]);
        if p2 <= ZERO_FIBER {
            continue;
        }
        for x in 0..d1 {
            let a = p12.probs[x * d2 + y];
            for z in 0..d3 {
                probs[(x * d2 + y) * d3 + z] = a * p23.probs[y * d3 + z] / p2;
            }
        }
    }
    let shape = FactorShape::new(vec![d1, d2, d3])?;
    // Renormalize away the rounding drift so the invariant holds at 1e-12.
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    ClassicalJoint::new(shape, probs)
}

/// Chain extension `p_{1..N} = p_{12} Π_{j=2}^{N-1} p_{j,j+1} / p_j`.
///
/// `joints[j]` is the joint law of `(x_{j+1}, x_{j+2})` (0-based list).
/// An inconsistent link reports its index in the list of links, i.e. the
/// pair `(joints[k-1], joints[k])` is link `k`.
pub fn chain_extension(joints: &[ClassicalJoint]) -> Result<ClassicalJoint> {
    let first = joints
        .first()
        .ok_or_else(|| Error::InvalidArgument("chain needs at least one joint".into()))?;
    first.require_bipartite()?;
    let mut dims = first.shape.dims().to_vec();
    let mut acc = first.clone();
    for (k, next) in joints.iter().enumerate().skip(1) {
        let (e, f) = next.require_bipartite()?;
        let last = *dims.last().expect("non-empty");
        if e != last {
            return Err(Error::ShapeMismatch(format!(
                "link {k}: alphabet {last} does not match {e}"
            )));
        }
        let prefix: usize = dims[..dims.len() - 1].iter().product();
        let flat = ClassicalJoint {
            shape: FactorShape::new(vec![prefix, last])?,
            probs: acc.probs,
        };
        let ext = extend_by_conditioning(&flat, next, k)?;
        dims.push(f);
        acc = ClassicalJoint {
            shape: FactorShape::new(dims.clone())?,
            probs: ext.probs,
        };
    }
    Ok(acc)
}

/// Golden-Thompson candidate
/// `R = exp(log ρ12 ⊗ I3 + I1 ⊗ log ρ23 − I1 ⊗ log ρ2 ⊗ I3)` and `Tr R`.
///
/// All three inputs must be positive definite (`λ_min > 1e-10`).
pub fn golden_thompson_r(pair: &CompatiblePair) -> Result<(ComplexMatrix, f64)> {
    let (d1, _, d3) = pair.dims();
    let log_of = |rho: &DensityMatrix, what: &str| -> Result<ComplexMatrix> {
        let min_eig = rho.min_eigenvalue();
        if min_eig <= 1e-10 {
            return Err(Error::NotPositiveDefinite {
                what: what.into(),
                min_eig,
            });
        }
        matrix_log(rho.matrix())
    };
    let l12 = log_of(pair.rho12(), "rho12")?;
    let l23 = log_of(pair.rho23(), "rho23")?;
    let l2 = log_of(pair.rho2(), "rho2")?;
    let i1 = ComplexMatrix::identity(d1);
    let i3 = ComplexMatrix::identity(d3);
    let mut exponent = kron(&l12, &i3);
    exponent += &kron(&i1, &l23);
    exponent -= &kron_all(&[&i1, &l2, &i3]);
    let r = matrix_exp(&exponent.hermitian_part())?;
    let tr = r.trace().re;
    Ok((r, tr))
}

/// Weights `λ_j > 0` with factor states `ρ(j)`, `σ(j)`, `τ(j)`.
#[derive(Debug, Clone)]
pub struct SeparableEnsemble {
    weights: Vec<f64>,
    rho: Vec<DensityMatrix>,
    sigma: Vec<DensityMatrix>,
    tau: Vec<DensityMatrix>,
}

impl SeparableEnsemble {
    pub fn new(
        weights: Vec<f64>,
        rho: Vec<DensityMatrix>,
        sigma: Vec<DensityMatrix>,
        tau: Vec<DensityMatrix>,
    ) -> Result<Self> {
        let n = weights.len();
        if n == 0 || rho.len() != n || sigma.len() != n || tau.len() != n {
            return Err(Error::InvalidEnsemble(format!(
                "lengths differ or empty: {} weights, {}/{}/{} factors",
                n,
                rho.len(),
                sigma.len(),
                tau.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidEnsemble(format!("weights must be positive, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}")));
        }
        for (name, list) in [("rho", &rho), ("sigma", &sigma), ("tau", &tau)] {
            if list.iter().any(|s| s.dim() != list[0].dim()) {
                return Err(Error::InvalidEnsemble(format!("{name} factors differ in dimension")));
            }
        }
        Ok(Self {
            weights,
            rho,
            sigma,
            tau,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Output of [`matched_separable_extension`].
#[derive(Debug, Clone)]
pub struct SeparableExtension {
    pub rho12: DensityMatrix,
    pub rho23: DensityMatrix,
    pub rho123: DensityMatrix,
}

/// `ρ12 = Σ λ_j ρ(j)⊗σ(j)`, `ρ23 = Σ λ_j σ(j)⊗τ(j)` and their common
/// extension `ρ123 = Σ λ_j ρ(j)⊗σ(j)⊗τ(j)`.
pub fn matched_separable_extension(ens: &SeparableEnsemble) -> SeparableExtension {
    let (d1, d2, d3) = (ens.rho[0].dim(), ens.sigma[0].dim(), ens.tau[0].dim());
    let mut m12 = ComplexMatrix::zeros(d1 * d2, d1 * d2);
    let mut m23 = ComplexMatrix::zeros(d2 * d3, d2 * d3);
    let mut m123 = ComplexMatrix::zeros(d1 * d2 * d3, d1 * d2 * d3);
    for j in 0..ens.len() {
        let w = ens.weights[j];
        let (r, s, t) = (ens.rho[j].matrix(), ens.sigma[j].matrix(), ens.tau[j].matrix());
        m12 += &kron(r, s).scale(w);
        m23 += &kron(s, t).scale(w);
        m123 += &kron_all(&[r, s, t]).scale(w);
    }
    let shape = |d: Vec<usize>| FactorShape::new(d).expect("positive dims");
    SeparableExtension {
        rho12: DensityMatrix::from_parts_unchecked(m12.hermitian_part(), shape(vec![d1, d2])),
        rho23: DensityMatrix::from_parts_unchecked(m23.hermitian_part(), shape(vec![d2, d3])),
        rho123: DensityMatrix::from_parts_unchecked(m123.hermitian_part(), shape(vec![d1, d2, d3])),
    }
}

/// Hermitian candidate
/// `ρ̃123 = ρ123 + [ρ̃12 − ρ12]⊗ρ̃3 + ρ̃1⊗[ρ̃23 − ρ23] + ρ̃1⊗[ρ2 − ρ̃2]⊗ρ̃3`
/// whose marginals are exactly the new pair, PSD or not. `ρ̃1`, `ρ̃3` are
/// marginals of the new pair and `ρ̃2` its agreed middle marginal.
pub fn perturbation_candidate(base123: &DensityMatrix, new_pair: &CompatiblePair) -> Result<ComplexMatrix> {
    let (d1, d2, d3) = new_pair.dims();
    if base123.shape().dims() != [d1, d2, d3] {
        return Err(Error::ShapeMismatch(format!(
            "base shape {:?} vs pair dims ({d1}, {d2}, {d3})",
            base123.shape().dims()
        )));
    }
    let shape = base123.shape();
    let m = base123.matrix();
    let rho12 = partial_trace(m, shape, &[0, 1])?;
    let rho23 = partial_trace(m, shape, &[1, 2])?;
    let rho2 = partial_trace(m, shape, &[1])?;
    let new1 = new_pair.rho1();
    let new3 = new_pair.rho3();
    let (n1, n3) = (new1.matrix(), new3.matrix());

    let mut out = m.clone();
    out += &kron(&(new_pair.rho12().matrix() - &rho12), n3);
    out += &kron(n1, &(new_pair.rho23().matrix() - &rho23));
    out += &kron_all(&[n1, &(&rho2 - new_pair.rho2().matrix()), n3]);
    Ok(out.hermitian_part())
}

/// Checked version of [`perturbation_candidate`]: fails with
/// [`Error::NotPsd`] carrying `λ_min` when the candidate is not PSD to
/// `1e-10`, which happens once the perturbation is too large.
pub fn perturbation_extension(base123: &DensityMatrix, new_pair: &CompatiblePair) -> Result<DensityMatrix> {
    let min_base = base123.min_eigenvalue();
    if min_base <= 1e-12 {
        return Err(Error::NotPositiveDefinite {
            what: "base extension".into(),
            min_eig: min_base,
        });
    }
    let cand = perturbation_candidate(base123, new_pair)?;
    let min_eig = crate::matcore::herm_eig(&cand)?.min_eigenvalue();
    if min_eig < -1e-10 {
        return Err(Error::NotPsd(min_eig));
    }
    DensityMatrix::new(cand, base123.shape().clone())
}

/// `ρ12 = diag(λ) ⊗ |Φ><Φ|` on `H1 = C^m ⊗ C^n`, `H2 = C^n`, with
/// `Φ = Σ_k √μ_k f_k ⊗ g_k`. Spectra: `ρ12 → λ`, `ρ2 → μ`,
/// `ρ1 → {λ_j μ_k}`, so `S12 = S1 − S2`.
pub fn build_triangle_equality_state(lambdas: &[f64], mus: &[f64]) -> Result<DensityMatrix> {
    for (name, v) in [("lambdas", lambdas), ("mus", mus)] {
        if v.is_empty() {
            return Err(Error::InvalidArgument(format!("{name} must be non-empty")));
        }
        if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("{name} sum to {s}, expected 1")));
        }
    }
    let (m, n) = (lambdas.len(), mus.len());
    let mut phi = vec![Complex64::new(0.0, 0.0); n * n];
    let norm: f64 = mus.iter().sum();
    for (k, &mu) in mus.iter().enumerate() {
        phi[k * n + k] = Complex64::new((mu / norm).sqrt(), 0.0);
    }
    let lsum: f64 = lambdas.iter().sum();
    let lam: Vec<f64> = lambdas.iter().map(|l| l / lsum).collect();
    let mat = kron(&ComplexMatrix::from_real_diag(&lam), &ComplexMatrix::projector(&phi));
    DensityMatrix::new(mat, FactorShape::new(vec![m * n, n])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{check_compatible_default, entropy_report};
    use crate::states::{random_density, random_density_shaped};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape(d: &[usize]) -> FactorShape {
        FactorShape::new(d.to_vec()).unwrap()
    }

    fn joint(d: &[usize], p: Vec<f64>) -> ClassicalJoint {
        ClassicalJoint::new(shape(d), p).unwrap()
    }

    fn outer_probs(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
    }

    #[test]
    fn independent_marginals_give_product() {
        let (p1, p2, p3) = ([0.2, 0.8], [0.5, 0.3, 0.2], [0.6, 0.4]);
        let ext = classical_extension(&joint(&[2, 3], outer_probs(&p1, &p2)), &joint(&[3, 2], outer_probs(&p2, &p3)))
            .unwrap();
        let expect = outer_probs(&outer_probs(&p1, &p2), &p3);
        for (a, b) in ext.probs().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_marginals_give_uniform() {
        let u = joint(&[2, 2], vec![0.25; 4]);
        let ext = classical_extension(&u, &u).unwrap();
        assert!(ext.probs().iter().all(|p| (p - 0.125).abs() < 1e-16));
    }

    #[test]
    fn zero_fibers_stay_zero() {
        let p12 = joint(&[2, 2], vec![0.5, 0.0, 0.5, 0.0]);
        let p23 = joint(&[2, 2], vec![0.3, 0.7, 0.0, 0.0]);
        let ext = classical_extension(&p12, &p23).unwrap();
        assert_eq!(ext.marginal(&[1]).unwrap().probs(), &[1.0, 0.0]);
        assert!(ext.probs().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn incompatible_classical_marginals() {
        let p12 = joint(&[2, 2], vec![0.25; 4]);
        let p23 = joint(&[2, 2], vec![0.4, 0.4, 0.1, 0.1]);
        assert!(matches!(
            classical_extension(&p12, &p23),
            Err(Error::IncompatibleMarginals { position: 0, .. })
        ));
        assert!(ClassicalJoint::new(shape(&[2]), vec![0.5, 0.6]).is_err());
        assert!(ClassicalJoint::new(shape(&[2]), vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn chain_of_three_matches_single_extension() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p123: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
        let s: f64 = p123.iter().sum();
        let base = joint(&[2, 3, 2], p123.iter().map(|p| p / s).collect());
        let p12 = base.marginal(&[0, 1]).unwrap();
        let p23 = base.marginal(&[1, 2]).unwrap();
        let a = classical_extension(&p12, &p23).unwrap();
        let b = chain_extension(&[p12, p23]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_chain() {
        let u = joint(&[2, 2], vec![0.25; 4]);
        let ext = chain_extension(&[u.clone(), u.clone(), u]).unwrap();
        assert_eq!(ext.shape().dims(), &[2, 2, 2, 2]);
        assert!(ext.probs().iter().all(|p| (p - 1.0 / 16.0).abs() < 1e-16));
    }

    #[test]
    fn chain_reports_bad_link() {
        let u = joint(&[2, 2], vec![0.25; 4]);
        let skew = joint(&[2, 2], vec![0.4, 0.4, 0.1, 0.1]);
        assert!(matches!(
            chain_extension(&[u.clone(), u, skew]),
            Err(Error::IncompatibleMarginals { position: 2, .. })
        ));
    }

    #[test]
    fn golden_thompson_commuting_and_product() {
        let p = random_density(2, 2, 1).unwrap();
        let q = random_density(2, 2, 2).unwrap();
        let r = random_density(2, 2, 3).unwrap();
        let pair = check_compatible_default(p.tensor(&q), q.tensor(&r)).unwrap();
        let (rmat, tr) = golden_thompson_r(&pair).unwrap();
        assert!((tr - 1.0).abs() < 1e-12);
        let prod = p.tensor(&q).tensor(&r);
        assert!((&rmat - prod.matrix()).max_abs() < 1e-12);

        let p123 = joint(&[2, 2, 2], vec![0.1, 0.15, 0.05, 0.2, 0.12, 0.08, 0.18, 0.12]);
        let c12 = p123.marginal(&[0, 1]).unwrap();
        let c23 = p123.marginal(&[1, 2]).unwrap();
        let cl = classical_extension(&c12, &c23).unwrap();
        let pair = check_compatible_default(c12.to_density(), c23.to_density()).unwrap();
        let (rmat, tr) = golden_thompson_r(&pair).unwrap();
        assert!((tr - 1.0).abs() < 1e-12);
        assert!((&rmat - cl.to_density().matrix()).max_abs() < 1e-12);
    }

    #[test]
    fn golden_thompson_requires_full_rank() {
        let pure = random_density_shaped(shape(&[2, 2]), 1, 5).unwrap();
        let rho2 = pure.marginal(&[1]).unwrap();
        let pair = check_compatible_default(pure, rho2.tensor(&random_density(2, 2, 6).unwrap())).unwrap();
        assert!(matches!(
            golden_thompson_r(&pair),
            Err(Error::NotPositiveDefinite { what, .. }) if what == "rho12"
        ));
    }

    #[test]
    fn separable_single_term_is_product() {
        let (r, s, t) = (
            random_density(2, 2, 1).unwrap(),
            random_density(3, 3, 2).unwrap(),
            random_density(2, 1, 3).unwrap(),
        );
        let ens = SeparableEnsemble::new(vec![1.0], vec![r.clone()], vec![s.clone()], vec![t.clone()]).unwrap();
        let ext = matched_separable_extension(&ens);
        assert!((ext.rho123.matrix() - r.tensor(&s).tensor(&t).matrix()).max_abs() < 1e-15);
    }

    #[test]
    fn separable_pure_factors_extend() {
        let pure = |seed| random_density(2, 1, seed).unwrap();
        let ens = SeparableEnsemble::new(
            vec![0.35, 0.65],
            vec![pure(1), pure(2)],
            vec![pure(3), pure(4)],
            vec![pure(5), pure(6)],
        )
        .unwrap();
        let ext = matched_separable_extension(&ens);
        let tr3 = ext.rho123.marginal(&[0, 1]).unwrap();
        let tr1 = ext.rho123.marginal(&[1, 2]).unwrap();
        assert!((tr3.matrix() - ext.rho12.matrix()).max_abs() < 1e-12);
        assert!((tr1.matrix() - ext.rho23.matrix()).max_abs() < 1e-12);
    }

    #[test]
    fn separable_rejects_zero_weight() {
        let s = random_density(2, 2, 1).unwrap();
        let err = SeparableEnsemble::new(
            vec![1.0, 0.0],
            vec![s.clone(), s.clone()],
            vec![s.clone(), s.clone()],
            vec![s.clone(), s],
        );
        assert!(matches!(err, Err(Error::InvalidEnsemble(_))));
    }

    fn maximally_mixed_base() -> DensityMatrix {
        DensityMatrix::maximally_mixed(shape(&[2, 2, 2]))
    }

    #[test]
    fn perturbation_with_same_pair_is_identity() {
        let base = random_density_shaped(shape(&[2, 2, 2]), 8, 3).unwrap();
        let pair = check_compatible_default(base.marginal(&[0, 1]).unwrap(), base.marginal(&[1, 2]).unwrap()).unwrap();
        let out = perturbation_extension(&base, &pair).unwrap();
        assert!((out.matrix() - base.matrix()).max_abs() < 1e-14);
    }

    #[test]
    fn small_perturbation_stays_psd() {
        let t = 1e-3;
        let sep = random_density(2, 1, 8).unwrap().tensor(&random_density(2, 1, 9).unwrap());
        let quarter = DensityMatrix::maximally_mixed(shape(&[2, 2]));
        let new12 = crate::states::mixture(&[1.0 - t, t], &[&quarter, &sep]).unwrap();
        let new2 = new12.marginal(&[1]).unwrap();
        let new23 = new2.tensor(&DensityMatrix::maximally_mixed(shape(&[2])));
        let pair = check_compatible_default(new12.clone(), new23.clone()).unwrap();
        let out = perturbation_extension(&maximally_mixed_base(), &pair).unwrap();
        assert!(out.min_eigenvalue() >= 0.0);
        assert!((out.marginal(&[0, 1]).unwrap().matrix() - new12.matrix()).max_abs() < 1e-10);
        assert!((out.marginal(&[1, 2]).unwrap().matrix() - new23.matrix()).max_abs() < 1e-10);
    }

    #[test]
    fn large_perturbation_toward_entangled_state_fails() {
        let half = DensityMatrix::maximally_mixed(shape(&[2]));
        let bell = crate::states::pure_coupling(&half, &half).unwrap();
        // Bell states on both overlapping pairs are monogamy-violating; the
        // candidate has λ_min = (1 − 2t)/8 on the common kernel.
        let t = 0.95;
        let quarter = DensityMatrix::maximally_mixed(shape(&[2, 2]));
        let noisy = crate::states::mixture(&[1.0 - t, t], &[&quarter, &bell]).unwrap();
        let pair = check_compatible_default(noisy.clone(), noisy.clone()).unwrap();
        let err = perturbation_extension(&maximally_mixed_base(), &pair).unwrap_err();
        assert!(matches!(err, Error::NotPsd(l) if (l - (1.0 - 2.0 * t) / 8.0).abs() < 1e-12));
        // The affine marginal identity holds regardless.
        let cand = perturbation_candidate(&maximally_mixed_base(), &pair).unwrap();
        let s = shape(&[2, 2, 2]);
        assert!((&partial_trace(&cand, &s, &[0, 1]).unwrap() - noisy.matrix()).max_abs() < 1e-12);
        assert!((&partial_trace(&cand, &s, &[1, 2]).unwrap() - noisy.matrix()).max_abs() < 1e-12);
    }

    #[test]
    fn triangle_state_spectra() {
        let st = build_triangle_equality_state(&[1.0], &[1.0]).unwrap();
        assert!(st.entropy().abs() < 1e-14);

        let st = build_triangle_equality_state(&[1.0], &[0.3, 0.7]).unwrap();
        let s1 = st.marginal(&[0]).unwrap().entropy();
        let s2 = st.marginal(&[1]).unwrap().entropy();
        assert!(st.entropy().abs() < 1e-12);
        assert!((s1 - s2).abs() < 1e-12);

        let st = build_triangle_equality_state(&[0.5, 0.5], &[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let mut spec1 = st.marginal(&[0]).unwrap().eigenvalues();
        spec1.sort_by(f64::total_cmp);
        let expect = [1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0];
        for (a, b) in spec1.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        let s1 = st.marginal(&[0]).unwrap().entropy();
        let s2 = st.marginal(&[1]).unwrap().entropy();
        assert!((st.entropy() - 2f64.ln()).abs() < 1e-12);
        assert!((s1 - s2 - 2f64.ln()).abs() < 1e-9);

        let rho2 = st.marginal(&[1]).unwrap();
        let pair = check_compatible_default(st, rho2.tensor(&random_density(2, 2, 1).unwrap())).unwrap();
        assert!(entropy_report(&pair).triangle_equality_12);
    }
}
