use thiserror::Error;

/// Errors raised by the Fock-space laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("Fock index {index} on mode {mode} exceeds cutoff {cutoff}")]
    CutoffViolation {
        mode: usize,
        index: usize,
        cutoff: usize,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension {dim} exceeds the configured ceiling {ceiling}")]
    DimensionCeiling { dim: usize, ceiling: usize },

    #[error("mode {mode} out of range for a {modes}-mode system")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("cutoff mismatch: {0}")]
    CutoffMismatch(String),

    #[error("empty mode selection")]
    EmptySelection,

    #[error("phase-space grid of radius {radius} too small: |chi| = {boundary:.3e} on the boundary")]
    GridTooSmall { radius: f64, boundary: f64 },

    #[error("covariance violates the uncertainty relation: min eigenvalue of gamma + i*Omega is {min_eig:.3e}")]
    NonPhysicalCovariance { min_eig: f64 },

    #[error("matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("Fock synthesis outside the Williamson frame is unsupported: {0}")]
    UnsupportedFrame(String),

    #[error("tail budget exceeded at step {step}: discarded {discarded:.3e} > budget {budget:.3e}")]
    TailBudgetExceeded {
        step: usize,
        discarded: f64,
        budget: f64,
    },

    #[error("SLD Gram matrix is rank deficient: {dim} directions below tolerance")]
    RankDeficient { dim: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
