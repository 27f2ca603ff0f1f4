use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no propagating modes for tone {tone} ({frequency} Hz)")]
    NoPropagatingModes { tone: usize, frequency: f64 },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("object {object} left the field validity region at step {step}: {reason}")]
    TrajectoryOutOfField {
        object: usize,
        step: usize,
        reason: String,
    },
    #[error("requested {requested} detections from a dictionary with {cells} cells")]
    TooManyDetections { requested: usize, cells: usize },
    #[error("length mismatch: {truth} truth steps vs {estimates} estimate steps")]
    LengthMismatch { truth: usize, estimates: usize },
    #[error("numerical corruption: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
