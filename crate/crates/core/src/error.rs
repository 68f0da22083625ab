use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero polynomial")]
    ZeroPolynomial,

    #[error("polynomial of degree {degree} is too small for this operation (need at least {needed})")]
    DegreeTooSmall { degree: usize, needed: usize },

    #[error("root finder did not converge after {iterations} iterations (residual {residual:.3e})")]
    RootsNotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<Complex64>,
    },

    #[error("empty point set")]
    EmptyPointSet,

    #[error("matrix dimensions {rows}x{cols} do not fit this operation")]
    Dimension { rows: usize, cols: usize },

    #[error("numerically singular matrix (pivot {pivot:.3e} at column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("QR iteration did not converge after {iterations} iterations")]
    QrNotConverged {
        iterations: usize,
        partial: Vec<Complex64>,
    },

    #[error("inverse iteration did not converge (residual {residual:.3e})")]
    EigenvectorNotConverged { residual: f64 },

    #[error("not a higher Lame operator: {0}")]
    NotLame(String),

    #[error("degenerate operator: deg Q_k = {deg_qk} but k + r = {expected}")]
    Degenerate { deg_qk: usize, expected: usize },

    #[error("resonant diagonal at degree {n}: lambda_{n} = lambda_{m}; eigenvector may not exist or not be unique")]
    Resonant { n: usize, m: usize },

    #[error("enumeration unsupported for r = {r} >= 2; use newton_refine with external guesses")]
    EnumerationUnsupported { r: i64 },

    #[error("wrong Fuchs index: this solver needs r = {expected}, operator has r = {found}")]
    WrongFuchsIndex { expected: i64, found: i64 },

    #[error("degree n = {n} is below the operator order k = {k}")]
    DegreeBelowOrder { n: usize, k: usize },

    #[error("empty spectrum at n = {n}")]
    EmptySpectrum { n: usize },

    #[error("point {z} coincides with the support")]
    OnSupport { z: Complex64 },

    #[error("probe {z} lies within {distance:.3e} of the hull (standoff {standoff})")]
    ProbeTooClose {
        z: Complex64,
        distance: f64,
        standoff: f64,
    },

    #[error("path passes within {distance:.3e} of a branch point on segment {segment}")]
    NearBranchPoint { segment: usize, distance: f64 },

    #[error("quadrature did not converge on segment {segment}")]
    QuadratureNotConverged { segment: usize },

    #[error("invalid branch data: {0}")]
    InvalidBranch(String),

    #[error("trajectory step size collapsed at {z} after {steps} steps")]
    StepCollapse {
        z: Complex64,
        steps: usize,
        trace: Vec<Complex64>,
    },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("{0}")]
    Invalid(String),
}
