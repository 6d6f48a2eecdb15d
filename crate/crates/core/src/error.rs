use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("signal lengths differ beyond tolerance: ppg {ppg}, ecg {ecg}")]
    LengthMismatchBeyondTolerance { ppg: usize, ecg: usize },
    #[error("peak annotations are not strictly increasing at position {0}")]
    NonMonotonePeaks(usize),
    #[error("sampling rates differ: ppg {ppg} Hz, ecg {ecg} Hz")]
    SamplingRateMismatch { ppg: f64, ecg: f64 },
    #[error("sampling rate must be positive, got {0}")]
    UnitMismatch(f64),

    #[error("too few peaks detected ({0}); signal unusable")]
    TooFewPeaks(usize),
    #[error("insufficient peaks for delay search: need {needed}, have {have}")]
    InsufficientPeaks { needed: usize, have: usize },
    #[error("sample shift leaves no common support")]
    EmptyOverlap,
    #[error("signal too short: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },
    #[error("no valid cycles after segmentation")]
    NoValidCycles,
    #[error("all cycles are degenerate (zero variance)")]
    AllCyclesDegenerate,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("coefficient count {count} outside [1, {len}]")]
    BadCount { count: usize, len: usize },

    #[error("too few cycles ({0}) for a train/test split")]
    TooFewCycles(usize),
    #[error("normal equations are singular or ill-conditioned (condition estimate {0:e})")]
    SingularSystem(f64),
    #[error("dimension mismatch: expected {expected} columns, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("reference vector has zero norm")]
    ZeroReference,
    #[error("input vector is constant")]
    ConstantInput,
    #[error("at least {needed} sessions required, got {have}")]
    TooFewSessions { needed: usize, have: usize },
    #[error("profile design matrix is rank deficient")]
    RankDeficientDesign,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error in {path} at line {line}: {msg}")]
    ParseError {
        path: PathBuf,
        line: u64,
        msg: String,
    },
    #[error("missing metadata in {path}: {msg}")]
    MissingMeta { path: PathBuf, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
