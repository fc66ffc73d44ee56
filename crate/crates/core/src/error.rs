use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric (defect {defect:.3e} > {allowed:.3e})")]
    NonSymmetricInput { defect: f64, allowed: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },
    #[error("matrix is not primitive")]
    NotPrimitive,
    #[error("matrix is numerically singular (pivot {pivot:.3e})")]
    SingularMatrix { pivot: f64 },
    #[error("shift {gamma} makes L + gamma I singular")]
    SingularShift { gamma: f64 },

    #[error("operator is neither ergodic nor primitive")]
    NotErgodic,
    #[error("eigenvector is not strictly positive (min entry {min_entry:.3e})")]
    NonPositiveEigenvector { min_entry: f64 },
    #[error("spectral gap {gap:.3e} does not exceed tolerance {tol:.3e}")]
    GapTooSmall { gap: f64, tol: f64 },
    #[error("dual pairing {witness:.3e} is degenerate")]
    DegenerateWitness { witness: f64 },

    #[error("invalid problem spec: {0}")]
    SpecInvalid(String),
    #[error("certification failed: {0}")]
    CertificationFailed(String),

    #[error("slopes must satisfy a < b (got a = {a}, b = {b})")]
    BadSlopes { a: f64, b: f64 },
    #[error("curvature scale must be positive (got {0})")]
    BadCurvature(f64),
    #[error("inner matrix is not positively stable: {0}")]
    NotPositivelyStable(String),
    #[error("weight vector must be strictly positive")]
    NonPositiveWeight,
    #[error("bad normalization: <phi*, phi> = {0:.3e}")]
    BadNormalization(f64),

    #[error("slice map is not a contraction (c = {0:.4})")]
    NotAContraction(f64),
    #[error("anchor is not in W (height {0:.3e})")]
    AnchorNotInW(f64),
    #[error("t window is too narrow: {0}")]
    WindowTooNarrow(String),
    #[error("invalid fiber request: {0}")]
    InvalidFiber(String),

    #[error("brute-force oracle supports dimension <= 3 (got {0})")]
    DimensionTooLarge(usize),
    #[error("point is critical (lambda = {0:.3e})")]
    CriticalPoint(f64),
    #[error("no canonical decomposition for nonlinearity kind {0}")]
    SupplierMissing(String),
    #[error("operation requires {0}")]
    WrongForm(String),
}
