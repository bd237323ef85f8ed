use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {deviation:.3e} > {tol:.3e})")]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("matrix is not unitary (max deviation {deviation:.3e} > {tol:.3e})")]
    NotUnitary { deviation: f64, tol: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("phase separation is zero: every power is trivial")]
    DegenerateSpectrum,
    #[error("all eigenvalues are degenerate: the operator acts as a scalar")]
    AllDegenerate,
    #[error("lambda {0} outside (0, 1/2)")]
    InvalidLambda(f64),
    #[error("sample list has length {found}, expected an odd length 2*n_l+1")]
    BadLength { found: usize },
    #[error("spectrum out of range: operator norm {norm:.6} exceeds 1")]
    SpectrumOutOfRange { norm: f64 },
    #[error("Magnus order {0} is not supported (only 1 and 2)")]
    UnsupportedOrder(usize),
    #[error("state is not normalized (norm^2 = {0:.12})")]
    NotNormalized(f64),
    #[error("channel output trace {0:.12} deviates from 1")]
    TraceViolation(f64),
    #[error("channel is not trace preserving (max deviation {0:.3e})")]
    NotTracePreserving(f64),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("degenerate probe: |Tr[O]/d - Tr[rho O]| = {0:.3e} cannot resolve the noise strength")]
    DegenerateDenominator(f64),
    #[error("noise strength {epsilon} outside the physical range [0, {max}]")]
    UnphysicalEpsilon { epsilon: f64, max: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
