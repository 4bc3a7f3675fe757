use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {0} vs {1}")]
    QubitMismatch(usize, usize),

    #[error("dense realization of {n_qubits} qubits exceeds the limit of {limit}")]
    DenseLimit { n_qubits: usize, limit: usize },

    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("hamiltonian has no terms")]
    EmptyHamiltonian,

    #[error("invalid term: {0}")]
    InvalidTerm(String),

    #[error("duplicate pauli string {0}")]
    DuplicateString(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("fitted parameter overflow: {0}")]
    FitOverflow(String),

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
