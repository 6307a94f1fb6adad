use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input dimension {got} does not match model input_dim {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid sparse vector: {0}")]
    InvalidSparse(String),

    #[error("imbalance ratio undefined: no positive instances under {0} labels")]
    UndefinedRatio(&'static str),

    #[error("AUC undefined: scores need at least one positive and one negative")]
    UndefinedAuc,

    #[error("instance `{id}` is missing its {which} label")]
    MissingLabel { id: String, which: &'static str },

    #[error("empty stratum: no {0} instances available")]
    EmptyStratum(&'static str),

    #[error("reward batch must contain both classes (use stratified reward sampling); got {positives} positive and {negatives} negative")]
    SingleClassReward { positives: usize, negatives: usize },

    #[error("negative weight {value} at index {index}; rectify before normalizing")]
    NegativeWeight { index: usize, value: f64 },

    #[error("non-finite loss for score {score}")]
    NonFiniteLoss { score: f64 },

    #[error("non-finite parameter update at step {step}")]
    NonFiniteUpdate { step: usize },

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint format `{found}` is not supported (expected `{expected}`)")]
    CheckpointVersion { found: String, expected: String },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid dataset: {0}")]
    Dataset(String),
}

pub type Result<T> = std::result::Result<T, Error>;
