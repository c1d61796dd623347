//! Common extensions of overlapping quantum marginals.
//!
//! Given bipartite density matrices `rho12` on `H1 ⊗ H2` and `rho23` on
//! `H2 ⊗ H3` whose `H2` marginals agree, this crate decides, builds, and
//! refutes tripartite states `rho123` with `Tr_3 rho123 = rho12` and
//! `Tr_1 rho123 = rho23`.
//!
//! - [`matcore`]: dense complex linear algebra (Jacobi eigensolver,
//!   spectral matrix functions, Kronecker products, partial traces).
//! - [`states`]: density matrices, entropy, couplings and purifications.
//! - [`criteria`]: compatibility, entropy diagnostics and necessary
//!   conditions (both forms of strong subadditivity, product-only
//!   obstruction).
//! - [`constructors`]: explicit extensions (classical conditioning,
//!   chains, separable ensembles, perturbations, triangle-equality states,
//!   the Golden-Thompson candidate).
//! - [`coherent`]: spin-1/2 coherent-state lift via upper symbols.
//! - [`feasibility`]: Dykstra alternating projections with facial
//!   reduction, null-space certificates, and the separable no-extension
//!   family.

pub mod coherent;
pub mod constructors;
pub mod criteria;
mod error;
pub mod feasibility;
pub mod matcore;
pub mod states;

pub use error::{Error, Result};
pub use num_complex::Complex64;
