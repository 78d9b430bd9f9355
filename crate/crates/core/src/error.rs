use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed RIFF/WAVE container: {0}")]
    MalformedContainer(String),

    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("audio contains no frames")]
    EmptyAudio,

    #[error("invalid sample rate {0} (must be positive)")]
    InvalidRate(f64),

    #[error("signal too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("sample {index} has value {value}, outside [-1, 1] or not finite")]
    SampleOutOfRange { index: usize, value: f64 },

    #[error("mix pool is insufficient: {0}")]
    InsufficientPool(String),

    #[error("component length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("component sample-rate mismatch: expected {expected} Hz, got {got} Hz")]
    RateMismatch { expected: u32, got: u32 },

    #[error("class id {class_id} outside label space of {num_classes} classes")]
    LabelOutOfRange { class_id: usize, num_classes: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unrecognized metadata schema; header was: {0}")]
    UnknownSchema(String),

    #[error("bad metadata row {row}: {reason}")]
    BadRow { row: usize, reason: String },

    #[error("invalid frequency range: {0}")]
    InvalidRange(String),

    #[error("degenerate standard deviation {0}; supply explicit statistics")]
    DegenerateStd(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("target {value} at index {index} is not 0 or 1")]
    InvalidTarget { index: usize, value: f64 },

    #[error("activation cache does not belong to these parameters")]
    StaleCache,

    #[error("too few items to split: need at least {needed}, got {got}")]
    TooFewItems { needed: usize, got: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("cannot evaluate an empty split")]
    EmptySplit,

    #[error("expected {expected} class names, got {got}")]
    NameCountMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("checkpoint configuration does not match the expected model configuration")]
    ConfigMismatch,

    #[error("feature file error: {0}")]
    FeatureFile(String),

    #[error("PNG error: {0}")]
    Png(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by non-finite numbers during optimization.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFiniteLoss { .. })
    }
}
