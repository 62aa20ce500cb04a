use thiserror::Error;

/// Errors raised by scenario construction, solvers and the redesign stage.
#[derive(Debug, Error)]
pub enum DesignError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("mainlobe direction unreachable from the masked subspace")]
    MainlobeUnreachable,

    #[error("solver failure: {0}")]
    SolverFailure(String),
}

pub type Result<T> = std::result::Result<T, DesignError>;
