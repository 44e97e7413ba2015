use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The argument of the inverse Neumann Laplacian has a nonzero mean.
    #[error("field mean {mean:e} is not zero; argument lies outside the domain of the inverse Laplacian")]
    NonzeroMean { mean: f64 },

    #[error("value {r} lies outside the effective domain of the potential")]
    DomainViolation { r: f64 },

    #[error("resolvent root solve did not converge for r = {r}")]
    ConvergenceFailure { r: f64 },

    #[error("operation requires the logarithmic potential with the piecewise regularization")]
    WrongVariant,

    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },

    #[error("initial data and control are incompatible with the potential domain: {0}")]
    Incompatible(String),

    #[error("mode count {requested} is outside 1..={available}")]
    BadModeCount { requested: usize, available: usize },

    #[error("Newton iteration failed to converge at substep {step}")]
    NewtonFailure { step: usize },

    #[error("parse error at line {line}, key `{key}`: {message}")]
    Parse {
        line: usize,
        key: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("malformed snapshot file: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonzeroMean { .. } => "NonzeroMean",
            Error::DomainViolation { .. } => "DomainViolation",
            Error::ConvergenceFailure { .. } => "ConvergenceFailure",
            Error::WrongVariant => "WrongVariant",
            Error::NonFinite { .. } => "NonFinite",
            Error::Incompatible(_) => "Incompatible",
            Error::BadModeCount { .. } => "BadModeCount",
            Error::NewtonFailure { .. } => "NewtonFailure",
            Error::Parse { .. } => "ParseError",
            Error::Validation(_) => "ValidationError",
            Error::Snapshot(_) => "SnapshotError",
            Error::Io(_) => "IoError",
        }
    }
}
