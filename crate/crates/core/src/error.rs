use thiserror::Error;

/// Error type shared by every geometric operation in this crate.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vectors are based at different points")]
    BasePointMismatch,

    #[error("operation requires a {expected} model, got {got}")]
    WrongModel { expected: &'static str, got: String },

    #[error("point violates the model constraint (residual {residual:.3e})")]
    OffManifold { residual: f64 },

    #[error("vector violates the tangency constraint (residual {residual:.3e})")]
    NotTangent { residual: f64 },

    #[error("rank deficiency at {location}: expected rank {expected}, found {found}")]
    RankDeficient {
        expected: usize,
        found: usize,
        location: String,
    },

    #[error("curve too coarse: segment {index} has arc length {len:.3e} > max step {max:.3e}")]
    CurveTooCoarse { index: usize, len: f64, max: f64 },

    #[error("orthonormal frame degenerated: {0}")]
    FrameDegenerate(String),

    #[error(
        "frame discontinuity at sample {index}: consecutive subspaces differ by residual {gap:.3}"
    )]
    FrameDiscontinuity { index: usize, gap: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, GeomError>;
