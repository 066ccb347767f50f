use thiserror::Error;

pub type Result<T, E = QcsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QcsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    InvalidQubit { index: usize, n_qubits: usize },

    #[error("qubit index {0} appears more than once")]
    DuplicateQubit(usize),

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NonUnitary { deviation: f64 },

    #[error("impossible postselection (probability {probability:.3e})")]
    ImpossiblePostselection { probability: f64 },

    #[error("state is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} is a density-matrix-only channel")]
    DensityMatrixOnly(&'static str),

    #[error("degenerate tomography: linear system could not be solved")]
    DegenerateTomography,

    #[error("system of {n_qubits} qubits exceeds the configured cap of {cap}")]
    TooManyQubits { n_qubits: usize, cap: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl QcsError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        QcsError::InvalidArgument(msg.into())
    }

    /// True for errors caused by bad inputs rather than numerical or IO failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            QcsError::Io(_) | QcsError::Json(_) | QcsError::DegenerateTomography
        )
    }
}
