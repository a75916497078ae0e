use thiserror::Error;

/// Errors raised when an input violates an operation's contract.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unsupported matrix dimension {0} (expected 2 or 4)")]
    UnsupportedDimension(usize),

    #[error("expected {expected} entries for a {dim}x{dim} matrix, got {got}")]
    EntryCount {
        dim: usize,
        expected: usize,
        got: usize,
    },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("operator is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("Kraus set is not complete (max |sum K^dag K - I| = {0:.3e})")]
    IncompleteKraus(f64),

    #[error("empty Kraus set")]
    EmptyKraus,

    #[error("operation requires a {expected}-qubit state, got {got} qubit(s)")]
    QubitCount { expected: usize, got: usize },

    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("axis is not a unit vector (norm {0})")]
    NotUnitVector(f64),

    #[error("incomplete tomography basis: {0}")]
    IncompleteBasis(String),

    #[error("invalid tomography record: {0}")]
    InvalidRecord(String),

    #[error("invalid fit problem: {0}")]
    InvalidProblem(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
