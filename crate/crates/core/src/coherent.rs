//! Spin-1/2 coherent states, upper symbols and the coherent-state lift.
//!
//! Conventions: `dΩ` is the uniform probability measure on the sphere, so
//! `∫ |Ω><Ω| dΩ = I/2`. The upper symbol of `A = αI + β·σ` is
//! `â(Ω) = 2α + 6 β·n(Ω)`, which makes `A = ∫ â(Ω) |Ω><Ω| dΩ`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::matcore::{kron_all, ComplexMatrix, FactorShape, HERMITIAN_TOL};
use crate::states::{CompatiblePair, DensityMatrix};
use crate::{Error, Result};

/// Floor for the middle symbol `ρ̃2(Ω2)`.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;

/// Minimum Gauss-Legendre order in `cos θ`.
pub const MIN_THETA_ORDER: usize = 8;

/// Minimum number of trapezoid nodes in `φ`.
pub const MIN_PHI_NODES: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Point on the unit sphere, `θ ∈ [0, π]`, `φ ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    theta: f64,
    phi: f64,
}

impl SpherePoint {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !(0.0..2.0 * PI).contains(&phi) {
            return Err(Error::InvalidArgument(format!(
                "sphere point out of range: theta {theta}, phi {phi}"
            )));
        }
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Unit normal `(sinθ cosφ, sinθ sinφ, cosθ)`.
    pub fn normal(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// `|Ω> = (cos(θ/2), e^{iφ} sin(θ/2))`.
    pub fn ket(&self) -> [Complex64; 2] {
        let (s, c) = (0.5 * self.theta).sin_cos();
        [Complex64::new(c, 0.0), Complex64::from_polar(s, self.phi)]
    }
}

/// `(I + n(Ω)·σ)/2`.
pub fn coherent_projector(omega: SpherePoint) -> ComplexMatrix {
    bloch_projector(omega.normal())
}

fn bloch_projector(n: [f64; 3]) -> ComplexMatrix {
    ComplexMatrix::new(
        2,
        2,
        vec![
            Complex64::new(0.5 * (1.0 + n[2]), 0.0),
            Complex64::new(0.5 * n[0], -0.5 * n[1]),
            Complex64::new(0.5 * n[0], 0.5 * n[1]),
            Complex64::new(0.5 * (1.0 - n[2]), 0.0),
        ],
    )
    .expect("2x2")
}

/// Quadrature rule for the uniform probability measure on the sphere.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    nodes: Vec<SpherePoint>,
    weights: Vec<f64>,
    normals: Vec<[f64; 3]>,
    order: usize,
}

impl SphereGrid {
    /// Validates a rule against every monomial `x^a y^b z^c` of degree
    /// `≤ order` (capped at 6) to `1e-12`. `order` must be at least 2.
    pub fn new(nodes: Vec<SpherePoint>, weights: Vec<f64>, order: usize) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::InvalidGrid(format!(
                "{} nodes with {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if order < 2 {
            return Err(Error::InvalidGrid(format!("order {order} is below 2")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-positive weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidGrid(format!("weights sum to {total}")));
        }
        let normals = nodes.iter().map(SpherePoint::normal).collect();
        let grid = Self {
            nodes,
            weights,
            normals,
            order,
        };
        for deg in 0..=order.min(6) {
            for a in 0..=deg {
                for b in 0..=deg - a {
                    let c = deg - a - b;
                    let got = grid.integrate(|n| n[0].powi(a as i32) * n[1].powi(b as i32) * n[2].powi(c as i32));
                    let want = sphere_monomial_mean(a, b, c);
                    if (got - want).abs() > 1e-12 {
                        return Err(Error::InvalidGrid(format!(
                            "monomial ({a}, {b}, {c}) integrates to {got}, expected {want}"
                        )));
                    }
                }
            }
        }
        Ok(grid)
    }

    /// Gauss-Legendre in `cos θ` times the trapezoid rule in `φ`.
    /// Requires `n_theta ≥ 8` and `n_phi ≥ 16`.
    pub fn product(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < MIN_THETA_ORDER || n_phi < MIN_PHI_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_THETA_ORDER} x {MIN_PHI_NODES} nodes, got {n_theta} x {n_phi}"
            )));
        }
        let (xs, ws) = gauss_legendre(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (x, w) in xs.iter().zip(&ws) {
            let theta = x.clamp(-1.0, 1.0).acos();
            for k in 0..n_phi {
                let phi = 2.0 * PI * k as f64 / n_phi as f64;
                nodes.push(SpherePoint { theta, phi });
                weights.push(0.5 * w / n_phi as f64);
            }
        }
        // Remove the rounding drift from the weight sum.
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let order = (2 * n_theta - 1).min(n_phi - 1);
        Self::new(nodes, weights, order)
    }

    pub fn nodes(&self) -> &[SpherePoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Polynomial degree integrated exactly.
    pub fn order(&self) -> usize {
        self.order
    }

    /// `∫ f(n) dΩ` by the rule, with compensated summation.
    pub fn integrate(&self, f: impl Fn([f64; 3]) -> f64) -> f64 {
        let mut acc = Neumaier::default();
        for (n, w) in self.normals.iter().zip(&self.weights) {
            acc.add(w * f(*n));
        }
        acc.total()
    }

    fn normal(&self, i: usize) -> [f64; 3] {
        self.normals[i]
    }
}

impl Default for SphereGrid {
    /// 8 × 16 product rule.
    fn default() -> Self {
        Self::product(MIN_THETA_ORDER, MIN_PHI_NODES).expect("default grid is valid")
    }
}

/// `E[x^a y^b z^c]` under the uniform measure:
/// `(a-1)!!(b-1)!!(c-1)!!/(a+b+c+1)!!` when all exponents are even, else 0.
pub fn sphere_monomial_mean(a: usize, b: usize, c: usize) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    let dfact = |n: i64| -> f64 { (1..=n).rev().step_by(2).map(|k| k as f64).product() };
    dfact(a as i64 - 1) * dfact(b as i64 - 1) * dfact(c as i64 - 1) / dfact((a + b + c) as i64 + 1)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the three-term recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (p, pm1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = x;
        xs[n - 1 - i] = -x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// `â(Ω) = c0 + c·n(Ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitSymbol {
    pub c0: f64,
    pub c: [f64; 3],
}

impl QubitSymbol {
    pub fn eval(&self, omega: SpherePoint) -> f64 {
        self.eval_normal(omega.normal())
    }

    pub fn eval_normal(&self, n: [f64; 3]) -> f64 {
        self.c0 + self.c[0] * n[0] + self.c[1] * n[1] + self.c[2] * n[2]
    }
}

fn pauli_coefficients(a: &ComplexMatrix) -> [f64; 4] {
    let (a00, a01, a10, a11) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    [
        0.5 * (a00 + a11).re,
        0.5 * (a01 + a10).re,
        0.5 * (a10 - a01).im,
        0.5 * (a00 - a11).re,
    ]
}

fn require_hermitian(a: &ComplexMatrix, dim: usize) -> Result<()> {
    if a.rows() != dim || a.cols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: a.rows().max(a.cols()),
        });
    }
    let asym = a.max_asymmetry();
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian(asym));
    }
    Ok(())
}

/// Upper symbol of a Hermitian 2×2 matrix: `c0 = Tr A`, `c_i = 3 Tr(A σ_i)`.
pub fn upper_symbol(a: &ComplexMatrix) -> Result<QubitSymbol> {
    require_hermitian(a, 2)?;
    let p = pauli_coefficients(a);
    Ok(QubitSymbol {
        c0: 2.0 * p[0],
        c: [6.0 * p[1], 6.0 * p[2], 6.0 * p[3]],
    })
}

/// Upper symbol of a Hermitian 4×4 matrix on two qubits:
/// `â(Ω1, Ω2) = Σ_ab a_ab s_a(Ω1) s_b(Ω2)` with `a_ab = Tr(A σa⊗σb)/4`,
/// `s_0 = 2`, `s_i = 6 n_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitSymbol {
    coeffs: [[f64; 4]; 4],
}

impl TwoQubitSymbol {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        require_hermitian(a, 4)?;
        let paulis = pauli_basis();
        let mut coeffs = [[0.0; 4]; 4];
        for (i, pa) in paulis.iter().enumerate() {
            for (j, pb) in paulis.iter().enumerate() {
                let s = crate::matcore::kron(pa, pb);
                // Tr(A S) with S Hermitian is real.
                coeffs[i][j] = 0.25 * s.frobenius_dot(a);
            }
        }
        Ok(Self { coeffs })
    }

    pub fn coefficients(&self) -> &[[f64; 4]; 4] {
        &self.coeffs
    }

    pub fn eval_normals(&self, n1: [f64; 3], n2: [f64; 3]) -> f64 {
        let s1 = [2.0, 6.0 * n1[0], 6.0 * n1[1], 6.0 * n1[2]];
        let s2 = [2.0, 6.0 * n2[0], 6.0 * n2[1], 6.0 * n2[2]];
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                acc += self.coeffs[a][b] * s1[a] * s2[b];
            }
        }
        acc
    }

    pub fn eval(&self, w1: SpherePoint, w2: SpherePoint) -> f64 {
        self.eval_normals(w1.normal(), w2.normal())
    }
}

fn pauli_basis() -> [ComplexMatrix; 4] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let m = |d: [Complex64; 4]| ComplexMatrix::new(2, 2, d.to_vec()).expect("2x2");
    [
        ComplexMatrix::identity(2),
        m([ZERO, c(1.0, 0.0), c(1.0, 0.0), ZERO]),
        m([ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]),
        m([c(1.0, 0.0), ZERO, ZERO, c(-1.0, 0.0)]),
    ]
}

/// `∫ f(Ω) |Ω><Ω| dΩ` by the rule.
pub fn quantize_fn(grid: &SphereGrid, f: impl Fn(SpherePoint) -> f64) -> ComplexMatrix {
    let mut acc = MatrixAccumulator::new(2);
    for (node, w) in grid.nodes.iter().zip(&grid.weights) {
        acc.add_scaled(&coherent_projector(*node), w * f(*node));
    }
    acc.finish()
}

/// Quantization of a single-qubit symbol.
pub fn quantize(symbol: &QubitSymbol, grid: &SphereGrid) -> ComplexMatrix {
    quantize_fn(grid, |omega| symbol.eval(omega))
}

/// `∭ f(i, j, k) |Ω_i><Ω_i| ⊗ |Ω_j><Ω_j| ⊗ |Ω_k><Ω_k|` over node indices
/// of three grids.
pub fn quantize_triple(grids: &[SphereGrid; 3], f: impl Fn(usize, usize, usize) -> f64) -> ComplexMatrix {
    let [g1, g2, g3] = grids;
    let proj3: Vec<ComplexMatrix> = g3.nodes.iter().map(|p| coherent_projector(*p)).collect();
    let mut acc = MatrixAccumulator::new(8);
    for i in 0..g1.len() {
        let p1 = coherent_projector(g1.nodes[i]);
        for j in 0..g2.len() {
            let mut inner = MatrixAccumulator::new(2);
            for (k, p3) in proj3.iter().enumerate() {
                inner.add_scaled(p3, g3.weights[k] * f(i, j, k));
            }
            let p2 = coherent_projector(g2.nodes[j]);
            let block = kron_all(&[&p1, &p2, &inner.finish()]);
            acc.add_scaled(&block, g1.weights[i] * g2.weights[j]);
        }
    }
    acc.finish()
}

/// Output of [`coherent_lift_extension`].
#[derive(Debug, Clone)]
pub struct CoherentLift {
    pub rho123: DensityMatrix,
    /// Max of the trace-norm distances of the two marginals to the inputs.
    pub marginal_residual: f64,
    pub min_eigenvalue: f64,
}

/// Classical conditioning of upper symbols, quantized back:
/// `ρ123 = ∭ ρ̃12 ρ̃23 / ρ̃2 · |Ω1><Ω1| ⊗ |Ω2><Ω2| ⊗ |Ω3><Ω3|`.
///
/// The middle symbol is `ρ̃2(Ω2) = ∫ ρ̃12(Ω1, Ω2) dΩ1` on `grids[0]`.
/// Fails with [`Error::NegativeSymbol`] if either bipartite symbol is
/// negative at a node and with [`Error::SmallDenominator`] if `ρ̃2 < 1e-8`.
pub fn coherent_lift_extension(pair: &CompatiblePair, grids: &[SphereGrid; 3]) -> Result<CoherentLift> {
    if pair.dims() != (2, 2, 2) {
        return Err(Error::ShapeMismatch(format!(
            "coherent lift needs qubit factors, got {:?}",
            pair.dims()
        )));
    }
    let [g1, g2, g3] = grids;
    let s12 = TwoQubitSymbol::new(pair.rho12().matrix())?;
    let s23 = TwoQubitSymbol::new(pair.rho23().matrix())?;

    let mut v12 = vec![0.0; g1.len() * g2.len()];
    for i in 0..g1.len() {
        for j in 0..g2.len() {
            let v = s12.eval_normals(g1.normal(i), g2.normal(j));
            if v < 0.0 {
                return Err(Error::NegativeSymbol {
                    which: "rho12",
                    node: (i, j),
                    value: v,
                });
            }
            v12[i * g2.len() + j] = v;
        }
    }
    let mut v23 = vec![0.0; g2.len() * g3.len()];
    for j in 0..g2.len() {
        for k in 0..g3.len() {
            let v = s23.eval_normals(g2.normal(j), g3.normal(k));
            if v < 0.0 {
                return Err(Error::NegativeSymbol {
                    which: "rho23",
                    node: (j, k),
                    value: v,
                });
            }
            v23[j * g3.len() + k] = v;
        }
    }

    let proj1: Vec<ComplexMatrix> = g1.nodes.iter().map(|p| coherent_projector(*p)).collect();
    let proj3: Vec<ComplexMatrix> = g3.nodes.iter().map(|p| coherent_projector(*p)).collect();
    let mut acc = MatrixAccumulator::new(8);
    for j in 0..g2.len() {
        // The triple sum factorizes over Ω2:
        // Σ_j w_j / ρ̃2(j) · M12(j) ⊗ P_j ⊗ M23(j).
        let mut m12 = MatrixAccumulator::new(2);
        let mut denom = Neumaier::default();
        for i in 0..g1.len() {
            let w = g1.weights[i] * v12[i * g2.len() + j];
            m12.add_scaled(&proj1[i], w);
            denom.add(w);
        }
        let denom = denom.total();
        if denom < DENOMINATOR_FLOOR {
            return Err(Error::SmallDenominator { node: j, value: denom });
        }
        let mut m23 = MatrixAccumulator::new(2);
        for k in 0..g3.len() {
            m23.add_scaled(&proj3[k], g3.weights[k] * v23[j * g3.len() + k]);
        }
        let block = kron_all(&[&m12.finish(), &coherent_projector(g2.nodes[j]), &m23.finish()]);
        acc.add_scaled(&block, g2.weights[j] / denom);
    }
    let mat = acc.finish().hermitian_part();
    let shape = FactorShape::new(vec![2, 2, 2])?;
    let min_eigenvalue = crate::matcore::herm_eig(&mat)?.min_eigenvalue();
    let rho123 = DensityMatrix::with_tolerance(mat, shape, 1e-9)?;
    let r12 = rho123.marginal(&[0, 1])?.trace_norm_distance(pair.rho12())?;
    let r23 = rho123.marginal(&[1, 2])?.trace_norm_distance(pair.rho23())?;
    Ok(CoherentLift {
        rho123,
        marginal_residual: r12.max(r23),
        min_eigenvalue,
    })
}

/// Lift with the default 8 × 16 grid on each sphere.
pub fn coherent_lift_default(pair: &CompatiblePair) -> Result<CoherentLift> {
    let g = SphereGrid::default();
    coherent_lift_extension(pair, &[g.clone(), g.clone(), g])
}

#[derive(Debug, Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Entrywise compensated sum of complex matrices.
struct MatrixAccumulator {
    n: usize,
    re: Vec<Neumaier>,
    im: Vec<Neumaier>,
}

impl MatrixAccumulator {
    fn new(n: usize) -> Self {
        Self {
            n,
            re: vec![Neumaier::default(); n * n],
            im: vec![Neumaier::default(); n * n],
        }
    }

    fn add_scaled(&mut self, m: &ComplexMatrix, s: f64) {
        for (idx, z) in m.data().iter().enumerate() {
            self.re[idx].add(s * z.re);
            self.im[idx].add(s * z.im);
        }
    }

    fn finish(&self) -> ComplexMatrix {
        let data = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| Complex64::new(r.total(), i.total()))
            .collect();
        ComplexMatrix::new(self.n, self.n, data).expect("square accumulator")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::check_compatible_default;
    use crate::matcore::herm_eig;

    fn bloch_state(r: [f64; 3]) -> DensityMatrix {
        DensityMatrix::new(bloch_projector(r), FactorShape::single(2).unwrap()).unwrap()
    }

    #[test]
    fn bloch_state_helper() {
        let s = bloch_state([0.0, 0.0, 0.3]);
        assert!((s.matrix()[(0, 0)].re - 0.65).abs() < 1e-15);
    }

    #[test]
    fn projector_poles_and_equator() {
        let north = coherent_projector(SpherePoint::new(0.0, 0.0).unwrap());
        assert!((&north - &ComplexMatrix::from_real_diag(&[1.0, 0.0])).max_abs() < 1e-15);
        let south = coherent_projector(SpherePoint::new(PI, 0.0).unwrap());
        assert!((&south - &ComplexMatrix::from_real_diag(&[0.0, 1.0])).max_abs() < 1e-15);
        let eq = coherent_projector(SpherePoint::new(PI / 2.0, 0.0).unwrap());
        assert!((&eq - &ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])).max_abs() < 1e-15);
    }

    #[test]
    fn projector_matches_ket() {
        let p = SpherePoint::new(1.1, 4.0).unwrap();
        let k = p.ket();
        let direct = ComplexMatrix::projector(&k);
        assert!((&direct - &coherent_projector(p)).max_abs() < 1e-15);
        assert!(SpherePoint::new(4.0, 0.0).is_err());
        assert!(SpherePoint::new(1.0, 2.0 * PI).is_err());
    }

    #[test]
    fn gauss_legendre_known_rule() {
        let (x, w) = gauss_legendre(3);
        let r = (0.6f64).sqrt();
        assert!((x[0] - r).abs() < 1e-15 && x[1].abs() < 1e-15 && (x[2] + r).abs() < 1e-15);
        assert!((w[0] - 5.0 / 9.0).abs() < 1e-15 && (w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn grid_exactness_and_validation() {
        let g = SphereGrid::default();
        assert_eq!(g.len(), 128);
        assert_eq!(g.order(), 15);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((g.integrate(|n| n[0] * n[0] * n[2] * n[2]) - 1.0 / 15.0).abs() < 1e-14);
        assert!(SphereGrid::product(4, 16).is_err());
        // One node at the north pole does not integrate z exactly.
        let bad = SphereGrid::new(vec![SpherePoint::new(0.0, 0.0).unwrap()], vec![1.0], 2);
        assert!(matches!(bad, Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn monomial_means() {
        assert_eq!(sphere_monomial_mean(0, 0, 0), 1.0);
        assert!((sphere_monomial_mean(2, 0, 0) - 1.0 / 3.0).abs() < 1e-16);
        assert!((sphere_monomial_mean(4, 0, 0) - 0.2).abs() < 1e-16);
        assert!((sphere_monomial_mean(2, 2, 2) - 1.0 / 105.0).abs() < 1e-16);
        assert_eq!(sphere_monomial_mean(1, 2, 0), 0.0);
    }

    #[test]
    fn symbols_of_simple_states() {
        let half = ComplexMatrix::identity(2).scale(0.5);
        let s = upper_symbol(&half).unwrap();
        assert_eq!(s, QubitSymbol { c0: 1.0, c: [0.0; 3] });

        let r = 0.4;
        let a = ComplexMatrix::from_real_diag(&[0.5 * (1.0 + r), 0.5 * (1.0 - r)]);
        let s = upper_symbol(&a).unwrap();
        let p = SpherePoint::new(0.7, 1.0).unwrap();
        assert!((s.eval(p) - (1.0 + 3.0 * r * 0.7f64.cos())).abs() < 1e-15);

        let s = upper_symbol(&ComplexMatrix::from_real_diag(&[1.0, 0.0])).unwrap();
        assert!((s.eval(SpherePoint::new(PI, 0.0).unwrap()) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn symbol_rejects_bad_input() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(upper_symbol(&a), Err(Error::NotHermitian(_))));
        assert!(matches!(
            upper_symbol(&ComplexMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reconstruction_round_trip() {
        let g = SphereGrid::default();
        assert!((&quantize(&QubitSymbol { c0: 1.0, c: [0.0; 3] }, &g) - &ComplexMatrix::identity(2).scale(0.5)).max_abs() < 1e-14);
        let a = ComplexMatrix::new(
            2,
            2,
            vec![
                Complex64::new(0.3, 0.0),
                Complex64::new(-0.2, 0.7),
                Complex64::new(-0.2, -0.7),
                Complex64::new(-1.1, 0.0),
            ],
        )
        .unwrap();
        let back = quantize(&upper_symbol(&a).unwrap(), &g);
        assert!((&back - &a).max_abs() < 1e-13);
    }

    #[test]
    fn two_qubit_symbol_of_product() {
        let r1 = bloch_state([0.1, -0.2, 0.05]);
        let r2 = bloch_state([0.0, 0.15, 0.2]);
        let s = TwoQubitSymbol::new(r1.tensor(&r2).matrix()).unwrap();
        let a1 = upper_symbol(r1.matrix()).unwrap();
        let a2 = upper_symbol(r2.matrix()).unwrap();
        let (p, q) = (SpherePoint::new(0.3, 2.0).unwrap(), SpherePoint::new(2.9, 5.5).unwrap());
        assert!((s.eval(p, q) - a1.eval(p) * a2.eval(q)).abs() < 1e-14);
    }

    #[test]
    fn lift_of_maximally_mixed() {
        let q = DensityMatrix::maximally_mixed(FactorShape::new(vec![2, 2]).unwrap());
        let pair = check_compatible_default(q.clone(), q).unwrap();
        let lift = coherent_lift_default(&pair).unwrap();
        let want = ComplexMatrix::identity(8).scale(0.125);
        assert!((lift.rho123.matrix() - &want).max_abs() < 1e-14);
        assert!(lift.marginal_residual < 1e-10);
    }

    #[test]
    fn lift_of_product_pair() {
        let r1 = bloch_state([0.2, 0.1, -0.15]);
        let r2 = bloch_state([-0.1, 0.2, 0.2]);
        let r3 = bloch_state([0.0, -0.25, 0.1]);
        let pair = check_compatible_default(r1.tensor(&r2), r2.tensor(&r3)).unwrap();
        let lift = coherent_lift_default(&pair).unwrap();
        let want = r1.tensor(&r2).tensor(&r3);
        assert!((lift.rho123.matrix() - want.matrix()).max_abs() < 1e-12);
        assert!(lift.marginal_residual < 1e-12);
    }

    #[test]
    fn large_bloch_radius_is_rejected() {
        let r1 = bloch_state([0.0, 0.0, 0.5]);
        let r2 = DensityMatrix::maximally_mixed(FactorShape::single(2).unwrap());
        let pair = check_compatible_default(r1.tensor(&r2), r2.tensor(&r2)).unwrap();
        assert!(matches!(
            coherent_lift_default(&pair),
            Err(Error::NegativeSymbol { which: "rho12", .. })
        ));
    }

    #[test]
    fn triple_quantization_of_nonnegative_function_is_psd() {
        let g = SphereGrid::default();
        let grids = [g.clone(), g.clone(), g];
        let m = quantize_triple(&grids, |i, j, k| ((i * 7 + j * 3 + k) % 5) as f64);
        assert!(herm_eig(&m.hermitian_part()).unwrap().min_eigenvalue() >= -1e-12);
        let one = quantize_triple(&grids, |_, _, _| 1.0);
        assert!((&one - &ComplexMatrix::identity(8).scale(0.125)).max_abs() < 1e-13);
    }
}
