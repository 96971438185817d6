use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch has zero energy")]
    ZeroEnergy,
    #[error("in-band energy is zero")]
    ZeroInbandEnergy,
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("thresholds must be ascending")]
    UnsortedThresholds,
    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("wrong bit count: expected {expected}, got {got}")]
    WrongBitCount { expected: usize, got: usize },
    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("reserved tone count {r} out of range for {n} subcarriers")]
    ReservedOutOfRange { r: usize, n: usize },
    #[error("batch size {0} too small for batch statistics")]
    BatchTooSmall(usize),
    #[error("backward called on a value not produced by this graph")]
    BackwardBeforeForward,
    #[error("penalty parameters must be positive")]
    NonPositivePenalty,
    #[error("training diverged at outer iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
