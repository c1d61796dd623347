//! Compatibility and entropy-based necessary conditions for a common
//! extension.
//!
//! Two forms of strong subadditivity must hold for any pair that has an
//! extension `ρ123`:
//!
//! - `S12 + S23 ≥ S2` (drop the nonnegative `S123` from
//!   `S12 + S23 ≥ S123 + S2`), reported as `slack_cheap`;
//! - `S12 + S23 ≥ S1 + S3`, reported as `slack_pol`.
//!
//! The second implies the first for every compatible pair through the
//! Araki-Lieb triangle inequality. States with `S12 = S1 − S2` only extend
//! against a product `ρ23 = ρ2 ⊗ ρ3`; the mirrored statement with systems 1
//! and 3 swapped holds as well and is checked too.

use serde::{Deserialize, Serialize};

use crate::states::{CompatiblePair, DensityMatrix, COMPATIBILITY_TOL};
use crate::Result;

/// Slack below which an SSA form counts as violated.
pub const SLACK_TOL: f64 = 1e-9;

/// Tolerance for detecting entropy equalities; looser than arithmetic
/// tolerances because `ln` amplifies eigenvalue error near zero.
pub const ENTROPY_EQ_TOL: f64 = 1e-7;

/// Trace-norm tolerance for deciding that a bipartite state is a product.
pub const PRODUCT_TOL: f64 = 1e-7;

/// Checks middle-marginal agreement `‖Tr1 ρ12 − Tr3 ρ23‖₁ ≤ tol`.
pub fn check_compatible(rho12: DensityMatrix, rho23: DensityMatrix, tol: f64) -> Result<CompatiblePair> {
    CompatiblePair::new(rho12, rho23, tol)
}

/// [`check_compatible`] with the default tolerance `1e-9`.
pub fn check_compatible_default(rho12: DensityMatrix, rho23: DensityMatrix) -> Result<CompatiblePair> {
    check_compatible(rho12, rho23, COMPATIBILITY_TOL)
}

/// Entropies (nats) of every marginal of a compatible pair, and the slacks
/// of the inequalities they enter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s12: f64,
    pub s23: f64,
    /// `S12 + S23 − S2`
    pub slack_cheap: f64,
    /// `S12 + S23 − S1 − S3`
    pub slack_pol: f64,
    /// `S12 − |S1 − S2|`
    pub al_slack12: f64,
    /// `S23 − |S2 − S3|`
    pub al_slack23: f64,
    /// `|S12 − (S1 − S2)| ≤ tol`
    pub triangle_equality_12: bool,
    /// `|S23 − (S3 − S2)| ≤ tol`
    pub triangle_equality_23: bool,
}

impl EntropyReport {
    /// Builds the report from the five entropies.
    pub fn from_entropies(s1: f64, s2: f64, s3: f64, s12: f64, s23: f64, eq_tol: f64) -> Self {
        Self {
            s1,
            s2,
            s3,
            s12,
            s23,
            slack_cheap: s12 + s23 - s2,
            slack_pol: s12 + s23 - s1 - s3,
            al_slack12: s12 - (s1 - s2).abs(),
            al_slack23: s23 - (s2 - s3).abs(),
            triangle_equality_12: (s12 - (s1 - s2)).abs() <= eq_tol,
            triangle_equality_23: (s23 - (s3 - s2)).abs() <= eq_tol,
        }
    }
}

pub fn entropy_report(pair: &CompatiblePair) -> EntropyReport {
    entropy_report_with_tol(pair, ENTROPY_EQ_TOL)
}

pub fn entropy_report_with_tol(pair: &CompatiblePair, eq_tol: f64) -> EntropyReport {
    EntropyReport::from_entropies(
        pair.rho1().entropy(),
        pair.rho2().entropy(),
        pair.rho3().entropy(),
        pair.rho12().entropy(),
        pair.rho23().entropy(),
        eq_tol,
    )
}

/// Outcome of the necessary-condition checks. It can only rule an
/// extension out; passing every check is not a proof of existence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NecessityVerdict {
    pub compatible: bool,
    /// `S12 + S23 ≥ S2`
    pub passes_cheap: bool,
    /// `S12 + S23 ≥ S1 + S3`
    pub passes_pol: bool,
    /// A triangle equality holds on either side, so the opposite state must
    /// be a product for an extension to exist.
    pub product_only_obstruction: bool,
    /// The required product structure is absent.
    pub product_required_but_absent: bool,
    /// Trace-norm distance of `ρ23` from `ρ2 ⊗ ρ3`.
    pub product_distance_23: f64,
    /// Trace-norm distance of `ρ12` from `ρ1 ⊗ ρ2`.
    pub product_distance_12: f64,
    pub blocked: bool,
}

impl NecessityVerdict {
    /// Human-readable reasons for a block, empty when not blocked.
    pub fn reasons(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.compatible {
            out.push("incompatible middle marginals");
        }
        if !self.passes_cheap {
            out.push("violates S12 + S23 >= S2");
        }
        if !self.passes_pol {
            out.push("violates S12 + S23 >= S1 + S3");
        }
        if self.product_required_but_absent {
            out.push("product-only obstruction");
        }
        out
    }
}

/// Tolerances used by [`necessary_conditions_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaTolerances {
    pub compatibility: f64,
    pub slack: f64,
    pub entropy_eq: f64,
    pub product: f64,
}

impl Default for CriteriaTolerances {
    fn default() -> Self {
        Self {
            compatibility: COMPATIBILITY_TOL,
            slack: SLACK_TOL,
            entropy_eq: ENTROPY_EQ_TOL,
            product: PRODUCT_TOL,
        }
    }
}

/// Runs every necessary condition on a compatible pair.
pub fn necessary_conditions(pair: &CompatiblePair) -> NecessityVerdict {
    necessary_conditions_with(pair, &CriteriaTolerances::default())
}

/// [`necessary_conditions`] with explicit tolerances.
pub fn necessary_conditions_with(pair: &CompatiblePair, tol: &CriteriaTolerances) -> NecessityVerdict {
    let report = entropy_report_with_tol(pair, tol.entropy_eq);
    let passes_cheap = report.slack_cheap >= -tol.slack;
    let passes_pol = report.slack_pol >= -tol.slack;

    let rho1 = pair.rho1();
    let rho3 = pair.rho3();
    let prod23 = pair.rho2().tensor(&rho3);
    let prod12 = rho1.tensor(pair.rho2());
    let product_distance_23 = pair
        .rho23()
        .trace_norm_distance(&prod23)
        .expect("same dimension");
    let product_distance_12 = pair
        .rho12()
        .trace_norm_distance(&prod12)
        .expect("same dimension");

    let product_only_obstruction = report.triangle_equality_12 || report.triangle_equality_23;
    let product_required_but_absent = (report.triangle_equality_12 && product_distance_23 > tol.product)
        || (report.triangle_equality_23 && product_distance_12 > tol.product);

    let compatible = pair.distance() <= tol.compatibility;
    let blocked = !(compatible && passes_cheap && passes_pol) || product_required_but_absent;
    NecessityVerdict {
        compatible,
        passes_cheap,
        passes_pol,
        product_only_obstruction,
        product_required_but_absent,
        product_distance_23,
        product_distance_12,
        blocked,
    }
}

/// `true` iff `(S12 + S23 ≥ S1 + S3) ⇒ (S12 + S23 ≥ S2)` holds on this pair.
pub fn implication_check(pair: &CompatiblePair) -> bool {
    let r = entropy_report(pair);
    let pol = r.slack_pol >= -SLACK_TOL;
    let cheap = r.slack_cheap >= -SLACK_TOL;
    !pol || cheap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::FactorShape;
    use crate::states::{pure_coupling, purify, random_density, random_density_shaped};
    use crate::Error;

    fn shape(d: &[usize]) -> FactorShape {
        FactorShape::new(d.to_vec()).unwrap()
    }

    fn ln2() -> f64 {
        2f64.ln()
    }

    #[test]
    fn product_pairs_are_compatible() {
        let r1 = random_density(2, 2, 1).unwrap();
        let r2 = random_density(2, 2, 2).unwrap();
        let r3 = random_density(3, 3, 3).unwrap();
        let pair = check_compatible_default(r1.tensor(&r2), r2.tensor(&r3)).unwrap();
        assert!(pair.distance() < 1e-14);
        assert_eq!(pair.dims(), (2, 2, 3));
    }

    #[test]
    fn mismatched_middles_are_rejected() {
        let r1 = random_density(2, 2, 1).unwrap();
        let r2 = random_density(2, 2, 2).unwrap();
        let s2 = random_density(2, 2, 4).unwrap();
        let r3 = random_density(2, 2, 3).unwrap();
        let err = check_compatible_default(r1.tensor(&r2), s2.tensor(&r3)).unwrap_err();
        assert!(matches!(err, Error::Incompatible { distance } if distance > 1e-3));
    }

    #[test]
    fn marginals_of_a_tripartite_state_are_compatible() {
        for seed in 0..5 {
            let rho = random_density_shaped(shape(&[2, 3, 2]), 12, seed).unwrap();
            let pair = check_compatible(rho.marginal(&[0, 1]).unwrap(), rho.marginal(&[1, 2]).unwrap(), 1e-12)
                .unwrap();
            assert!(pair.distance() <= 1e-12);
        }
    }

    #[test]
    fn purification_example_saturates_cheap_form() {
        let half = DensityMatrix::maximally_mixed(shape(&[2]));
        let rho12 = purify(&half, 2).unwrap();
        // purify puts the system first; reorder is unnecessary since I/2 is symmetric.
        let zero = DensityMatrix::from_probabilities(&[1.0, 0.0], shape(&[1 + 1])).unwrap();
        let rho23 = half.tensor(&zero);
        let pair = check_compatible_default(rho12, rho23).unwrap();
        let r = entropy_report(&pair);
        assert!(r.s12.abs() < 1e-12);
        assert!((r.s23 - ln2()).abs() < 1e-12);
        assert!((r.s2 - ln2()).abs() < 1e-12);
        assert!(r.slack_cheap.abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_pair_slacks() {
        let quarter = DensityMatrix::maximally_mixed(shape(&[2, 2]));
        let pair = check_compatible_default(quarter.clone(), quarter).unwrap();
        let r = entropy_report(&pair);
        assert!((r.slack_pol - 2.0 * ln2()).abs() < 1e-12);
        assert!((r.slack_cheap - 3.0 * ln2()).abs() < 1e-12);
        assert_eq!(r.slack_pol, r.s12 + r.s23 - r.s1 - r.s3);
    }

    #[test]
    fn pure_rho12_with_product_rho23_is_not_blocked() {
        let r = random_density(2, 2, 7).unwrap();
        let rho12 = pure_coupling(&r, &r).unwrap();
        let rho3 = random_density(2, 2, 8).unwrap();
        let rho23 = rho12.marginal(&[1]).unwrap().tensor(&rho3);
        let pair = check_compatible_default(rho12, rho23).unwrap();
        let v = necessary_conditions(&pair);
        assert!(v.product_only_obstruction);
        assert!(!v.blocked, "{v:?}");
    }

    #[test]
    fn pure_rho12_with_entangled_rho23_is_blocked() {
        let r = random_density(2, 2, 7).unwrap();
        let rho12 = pure_coupling(&r, &r).unwrap();
        let rho2 = rho12.marginal(&[1]).unwrap();
        let rho23 = purify(&rho2, 2).unwrap();
        let pair = check_compatible_default(rho12, rho23).unwrap();
        let v = necessary_conditions(&pair);
        assert!(v.blocked);
        assert!(v.product_required_but_absent);
        assert!(v.reasons().contains(&"product-only obstruction"));
    }

    #[test]
    fn mirrored_obstruction_blocks() {
        // Pure ρ23 entangled with an entangled ρ12: the 23-side triangle
        // equality requires ρ12 to be a product.
        let r = random_density(2, 2, 17).unwrap();
        let rho23 = pure_coupling(&r, &r).unwrap();
        let rho2 = rho23.marginal(&[0]).unwrap();
        let p = purify(&rho2, 2).unwrap();
        // purify gives (system, ancilla); ρ12 needs ρ2 on the second factor.
        let swap = crate::states::swap_factors(&p).unwrap();
        let pair = check_compatible_default(swap, rho23).unwrap();
        let v = necessary_conditions(&pair);
        assert!(v.blocked);
        assert!(v.product_required_but_absent);
    }

    #[test]
    fn implication_holds_on_samples() {
        for seed in 0..50 {
            let rho = random_density_shaped(shape(&[2, 2, 2]), 1 + (seed as usize % 8), seed).unwrap();
            let pair =
                check_compatible_default(rho.marginal(&[0, 1]).unwrap(), rho.marginal(&[1, 2]).unwrap()).unwrap();
            assert!(implication_check(&pair));
            let r = entropy_report(&pair);
            let s123 = rho.entropy();
            assert!(r.slack_cheap >= s123 - 1e-8);
            assert!(r.slack_pol >= -1e-8);
        }
    }
}
