use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid belief: entries must be in [0,1] and sum to 1 (sum={sum}, n={n})")]
    InvalidBelief { sum: f64, n: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("bound not applicable: margin m={m} outside [1, n_y={n_y}]")]
    BoundNotApplicable { m: f64, n_y: usize },

    #[error("impossible observation: total likelihood is zero (action {action}, obs {obs})")]
    ImpossibleObservation { action: usize, obs: usize },

    #[error("particle set degenerate: all weights zero")]
    DegenerateParticles,

    #[error("enumeration guard exceeded: {0}")]
    SizeGuard(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("episode state error: {0}")]
    EpisodeState(String),

    #[error("IDX format error at byte offset {offset}: {message}")]
    IdxFormat { offset: u64, message: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("label {label} out of range (n_classes={n_classes})")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
