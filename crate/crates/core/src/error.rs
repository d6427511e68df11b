use thiserror::Error;

#[derive(Debug, Error)]
pub enum QnetError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("closed form unavailable: {0}; use general_scattering")]
    UnsupportedClosedForm(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("stiffness: {0}")]
    Stiffness(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("steady state not unique: null space has dimension {0}")]
    Multiplicity(usize),
    #[error("size limit exceeded: {0}")]
    TooLarge(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QnetError>;
