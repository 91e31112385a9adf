use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("eigendecomposition failed: {0}")]
    DecompositionFailed(String),
    #[error("matrix is singular: {0}")]
    SingularInput(String),
    #[error("eigenvalue {0} lies on the principal-log branch cut")]
    BranchCut(String),
    #[error("resolvent I - (delta/2)A is singular")]
    SingularResolvent,
    #[error("factor exp(delta A) - I is singular")]
    SingularFactor,
    #[error("pole hit at index {index}: denominator modulus {modulus:e}")]
    PoleHit { index: usize, modulus: f64 },
    #[error("kernel system Q^j is singular for j = {0}")]
    SingularQ(usize),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("assignment is degenerate: {0}")]
    NoAssignment(String),
    #[error("orthogonality violated: residual {0:e}")]
    OrthogonalityViolated(f64),
    #[error("f(lambda) has no principal square root at index {0}")]
    BadF(usize),
    #[error("matrix is rank deficient")]
    RankDeficient,
    #[error("spectrum is degenerate: {0}")]
    DegenerateSpectrum(String),
    #[error("eigenvalue {0} is not positive")]
    NonPositiveEigenvalue(f64),
    #[error("divergence detected at step {step} (loss {loss:e})")]
    DivergenceDetected { step: usize, loss: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
