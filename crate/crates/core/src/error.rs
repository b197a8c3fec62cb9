use thiserror::Error;

/// Errors reported by model construction, integration and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("constraint bounds must satisfy lower < upper (coordinate {0})")]
    InvalidBounds(usize),

    #[error("reflection loop exceeded {0} iterations")]
    ReflectionOverflow(usize),

    #[error("target has no split parts, required by the chosen split scheme")]
    MissingSplitParts,

    #[error("analytic split scheme requires an exact flow solver")]
    MissingAnalyticSolver,

    #[error("chain record is empty")]
    EmptyChain,

    #[error("series is constant; autocorrelation time is undefined")]
    ConstantSeries,

    #[error("series too short: need at least {need}, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("singular matrix in {0}")]
    SingularMatrix(&'static str),

    #[error("unknown target name: {0}")]
    UnknownTarget(String),
}

pub type Result<T> = std::result::Result<T, Error>;
