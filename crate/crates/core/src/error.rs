//! Error types shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("potential is not integrable: {0}")]
    NonIntegrablePotential(String),
    #[error("potential must be nonnegative: V({r}) = {v}")]
    NegativePotential { r: f64, v: f64 },
    #[error("asymptote fit failed (residual {residual:.3e} above tolerance {tol:.3e}); r_max likely too small")]
    AsymptoteFitFailure { residual: f64, tol: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("cutoff too small: ell = {ell} must exceed 2 R0 / N = {min_ell}")]
    CutoffTooSmall { ell: f64, min_ell: f64 },
    #[error("grid does not resolve the requested scales: {0}")]
    UnderresolvedGrid(String),
    #[error("minimizer did not converge: residual {residual:.3e} after {iterations} iterations (tol {tol:.3e})")]
    NonConvergence { residual: f64, iterations: usize, tol: f64 },
    #[error("box too small: boundary mass {boundary_mass:.3e} above threshold {threshold:.3e}")]
    BoxTooSmall { boundary_mass: f64, threshold: f64 },
    #[error("degenerate quadrature: {0}")]
    DegenerateQuadrature(String),
    #[error("D is not positive definite on the excitation subspace (min eigenvalue {min_eig:.3e})")]
    NonPositiveD { min_eig: f64 },
    #[error("kernel under-resolved: {0}")]
    UnderresolvedKernel(String),
    #[error("basis kind does not support this assembly: {0}")]
    UnsupportedBasis(String),
    #[error("D + 2K has a nonpositive eigenvalue ({min_eig:.3e}); ell too large or state unconverged")]
    IndefiniteInner { min_eig: f64 },
    #[error("E is numerically singular (min eigenvalue {min_eig:.3e})")]
    SingularE { min_eig: f64 },
    #[error("D is numerically singular (min eigenvalue {min_eig:.3e})")]
    SingularD { min_eig: f64 },
    #[error("need at least 3 dyadic ell values, got {0}")]
    InsufficientEllValues(usize),
    #[error("need at least 3 values per axis for a scaling fit, got {0}")]
    InsufficientSamplePoints(usize),
    #[error("Fock space too large: {what} = {got} exceeds limit {limit}")]
    DimensionOverflow { what: &'static str, got: usize, limit: usize },
    #[error("truncated-Fock deviation not decreasing in n_max (K too large relative to D)")]
    NonConvergentTruncation,
    #[error("Bogoliubov unitary leaks into the truncation boundary: leakage {leakage:.3e}")]
    TruncationLeak { leakage: f64 },
    #[error("level enumeration exceeds {limit} levels; Lambda too large for the spectral gap")]
    ExplosionGuard { limit: usize },
    #[error("spectrum reports have different caps: {a} vs {b}")]
    CapMismatch { a: f64, b: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
