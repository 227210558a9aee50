//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the preprocessing pipeline, the network core, training
/// and evaluation, and dataset I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("segment too short: removing {removed} samples from a {len}-sample record leaves nothing")]
    SegmentTooShort { len: usize, removed: usize },

    #[error("cutoff {cutoff_hz} Hz is at or above the Nyquist frequency {nyquist_hz} Hz")]
    CutoffAboveNyquist { cutoff_hz: f64, nyquist_hz: f64 },

    #[error("cutoff frequency must be strictly positive, got {0}")]
    NonPositiveCutoff(f64),

    #[error("window of {wanted} samples is longer than the {len}-sample record")]
    WindowLongerThanRecord { wanted: usize, len: usize },

    #[error("record is missing channel {0}")]
    MissingChannel(String),

    #[error("channel lengths disagree: {0}")]
    ChannelLengthMismatch(String),

    #[error("normalizer fit set is empty")]
    EmptyFitSet,

    #[error("edge measurement list is empty")]
    EmptyMeasurementList,

    #[error("wear profile does not cover [{span_lo}, {span_hi}] um (profile spans [{profile_lo}, {profile_hi}])")]
    ProfileCoverage {
        span_lo: f64,
        span_hi: f64,
        profile_lo: f64,
        profile_hi: f64,
    },

    #[error("invalid wear profile: {0}")]
    InvalidProfile(String),

    #[error("invalid wear measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid wear label: {0}")]
    InvalidLabel(String),

    #[error("unknown condition key '{0}' (expected one of v_c, a_p, a_e, f_z)")]
    UnknownConditionKey(String),

    #[error("kernel of size {kernel} does not fit input of length {input} with padding {padding}")]
    KernelLargerThanInput {
        kernel: usize,
        input: usize,
        padding: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("metric input is empty")]
    EmptyMetricInput,

    #[error("actual values are (near-)constant; R^2 is undefined")]
    DegenerateActuals,

    #[error("reference metric is zero; advantage percentage is undefined")]
    DivisionByZeroReference,

    #[error("training dataset is empty")]
    EmptyDataset,

    #[error("no cuts in the dataset have feed per tooth {0}")]
    UnknownFpt(f64),

    #[error("dataset covers a single feed per tooth; transfer split is impossible")]
    SingleFptDataset,

    #[error("window of {0} steps is too short for the default architecture (minimum 64)")]
    WindowTooShort(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset manifest error: {0}")]
    Manifest(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
