use alloc::string::String;

use crate::geometry::ExitReason;

/// Errors raised by the numerical operations in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("flow left its domain at t = {t} ({reason:?})")]
    FlowExit { t: f64, reason: ExitReason },

    #[error("kernel is not hermitian: asymmetry {asymmetry:e}")]
    NotHermitian { asymmetry: f64 },

    #[error("no eigenvalue above the rank cutoff")]
    EmptyModel,

    #[error("positive definite function is not evaluable on a needed product: {0}")]
    MissingProduct(String),

    #[error("function is not positive definite on the sample (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("basis element `{element}` contradicts the h/q split (defect {defect:e})")]
    Compatibility { element: String, defect: f64 },

    #[error("symmetry defect {defect:e} exceeds tolerance {tol:e}")]
    ClassificationInconsistency { defect: f64, tol: f64 },

    #[error("operation requires a {required} operator")]
    SymmetryMismatch { required: &'static str },

    #[error("symmetric pair validation failed: {0}")]
    Validation(String),

    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),

    #[error("degenerate quotient: twisted Gram has numerical rank 0")]
    DegenerateQuotient,

    #[error("test functions live on different grids")]
    GridMismatch,

    #[error("test function support reaches the grid margin")]
    SupportMargin,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
