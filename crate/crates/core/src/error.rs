use thiserror::Error;

/// Errors raised by the numeric and construction routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("data length {got} does not match {rows}x{cols}")]
    InvalidData { rows: usize, cols: usize, got: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("{what} is not positive definite (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { what: String, min_eig: f64 },

    #[error("not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace is {0}, expected 1")]
    InvalidTrace(f64),

    #[error("nonzero spectra do not match: {0}")]
    SpectraMismatch(String),

    #[error("ancilla dimension {ancilla} is smaller than the rank {rank}")]
    AncillaTooSmall { ancilla: usize, rank: usize },

    #[error("middle marginals differ by {distance:e} in trace norm")]
    Incompatible { distance: f64 },

    #[error("classical marginals disagree at link {position} (max deviation {deviation:e})")]
    IncompatibleMarginals { position: usize, deviation: f64 },

    #[error("invalid probability table: {0}")]
    InvalidDistribution(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("upper symbol of {which} is negative ({value:e}) at grid node {node:?}")]
    NegativeSymbol {
        which: &'static str,
        node: (usize, usize),
        value: f64,
    },

    #[error("middle symbol {value:e} below floor at grid node {node}")]
    SmallDenominator { node: usize, value: f64 },

    #[error("invalid sphere grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate choice: {0}")]
    DegenerateChoice(String),

    #[error("certificate spans only {span_dim} of {dim} dimensions")]
    CertificateDegenerate { span_dim: usize, dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
