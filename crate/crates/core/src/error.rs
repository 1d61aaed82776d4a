use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (defect {defect:.3e} exceeds {tol:.3e})")]
    NonHermitianInput { defect: f64, tol: f64 },
    #[error("matrix is not anti-Hermitian (defect {defect:.3e} exceeds {tol:.3e})")]
    NonAntiHermitianInput { defect: f64, tol: f64 },
    #[error("iterative routine did not converge after {iterations} iterations")]
    ConvergenceFailure { iterations: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("truncation defect {defect:.3e} exceeds tolerance {tol:.3e}; increase n_max")]
    TruncationError { defect: f64, tol: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("parameter domain is empty")]
    DomainEmpty,
    #[error("parameter outside the family domain: {0}")]
    DomainViolation(String),
    #[error("sample set degenerate: {0}")]
    DegenerateSampleSet(String),
    #[error("Kraus mixing matrix is not unitary (defect {defect:.3e})")]
    NonUnitaryTransform { defect: f64 },
    #[error("inferred Gamma relation is not transitive ({flips} entries would need flipping, budget {budget})")]
    InconsistentGamma { flips: usize, budget: usize },
    #[error("sample Gram matrix too ill-conditioned for the isometry solve (condition {cond:.3e} > {cond_max:.3e})")]
    IllConditionedSolve { cond: f64, cond_max: f64 },
    #[error("every error index in block {block} has vanishing coefficients")]
    ZeroCoefficientBlock { block: usize },
    #[error("channel annihilates the state (trace {trace:.3e})")]
    ZeroTrace { trace: f64 },
    #[error("operation requires a trace-preserving channel (defect {defect:.3e})")]
    NotTracePreserving { defect: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
