use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("timestep {t} out of range 0..={max}")]
    TimestepRange { t: usize, max: usize },

    #[error("DDIM step must move backwards in time (from {from} to {to})")]
    StepOrdering { from: usize, to: usize },

    #[error("schedule is singular at timestep {t} (alpha_bar = 0)")]
    SingularSchedule { t: usize },

    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid timestep plan: {0}")]
    InvalidPlan(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("point {index} has nonpositive depth {depth}")]
    Projection { index: usize, depth: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid keypoint regressor: {0}")]
    InvalidRegressor(String),

    #[error("control strength {0} outside [0, 1]")]
    Strength(f64),

    #[error("mask is empty")]
    EmptyMask,

    #[error("no hands found")]
    NoHands,

    #[error("mesh reconstruction failed for hand {hand}: {reason}")]
    MeshReconstruction { hand: usize, reason: String },

    #[error("hand detection failed on every sample ({} attempts)", attempts.len())]
    DetectionFailed { attempts: Vec<(f64, String)> },

    #[error("codec failure: {0}")]
    Codec(String),

    #[error("non-finite loss at step {step} (trace: {trace:?})")]
    NonFiniteLoss { step: usize, trace: Vec<f64> },

    #[error("need at least {needed} samples, got {count}")]
    InsufficientData { count: usize, needed: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to load model from {path}: {reason}")]
    ModelLoad { path: PathBuf, reason: String },

    #[error("malformed input {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl std::fmt::Debug, found: impl std::fmt::Debug) -> Self {
        Error::Shape {
            expected: format!("{expected:?}"),
            found: format!("{found:?}"),
        }
    }
}
