use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("negative distribution value {value:e} at index {index}")]
    NegativeDistribution { index: usize, value: f64 },
    #[error("distribution has non-positive total mass")]
    NoMass,
    #[error("density not positive at q-index {0}")]
    NonPositiveDensity(usize),
    #[error("temperature not positive at q-index {0}")]
    NonPositiveTemperature(usize),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("reference density vanishes where the compared density is {value:e} (index {index})")]
    SupportMismatch { index: usize, value: f64 },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("singular triangular system at diagonal {0}")]
    Singular(usize),
    #[error("solver abort at t = {time}: {reason}")]
    SolverAbort { time: f64, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, KinError>;
