use thiserror::Error;

/// Errors raised by domain construction, maps, flows and experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size {0} is below the minimum of 16")]
    GridTooSmall(usize),

    #[error("non-positive radius {value} at angle {angle}")]
    NonPositiveRadius { angle: f64, value: f64 },

    #[error("polygon is not star-shaped with respect to the origin: {0}")]
    NotStarShaped(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("integration tolerance not met: estimated error {estimate:e} exceeds {tolerance:e}")]
    IntegrationTolerance { estimate: f64, tolerance: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("sampling pitch {pitch} is too coarse for box size {eps} (need pitch <= eps/4)")]
    PitchTooCoarse { pitch: f64, eps: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
