//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid depth {depth} for {family}: expected {expected}")]
    InvalidDepth {
        family: &'static str,
        depth: u32,
        expected: &'static str,
    },

    #[error("unknown stage {0}")]
    UnknownStage(usize),

    #[error("unsupported document version {0} (this build reads version 1)")]
    UnsupportedVersion(u32),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("scaling channels by {num}/{den} leaves stage {stage} at a non-integral channel count ({channels} channels)")]
    NonIntegralChannels {
        stage: usize,
        channels: u32,
        num: u32,
        den: u32,
    },

    #[error("unsupported reuse factor {0} (expected 2, 4, 8, or 16)")]
    UnsupportedReuse(u32),

    #[error("reuse factor {n} needs channel counts divisible by {divisor}; stage {stage} has {channels}")]
    ReuseDivisibility {
        n: u32,
        divisor: u32,
        stage: usize,
        channels: u32,
    },

    #[error("probe set needs at least two stages")]
    NotEnoughProbes,

    #[error("duplicate probe for stage {0}")]
    DuplicateStage(usize),

    #[error("probe for stage {0} has no distilled accuracy column")]
    MissingKdColumn(usize),

    #[error("criticality order must be a permutation of stages 1..={expected}")]
    IncompleteOrder { expected: usize },

    #[error("equalization problem needs between 2 and 6 stages, got {0}")]
    BadStageCount(usize),

    #[error("calibration has no latency anchors")]
    EmptyAnchors,

    #[error("calibration anchors must have distinct flop counts (duplicate at {0}M)")]
    DuplicateAnchor(f64),

    #[error("invalid calibration value: {0}")]
    BadCalibration(String),

    #[error("design point '{0}' has no cost estimate")]
    MissingCost(String),

    #[error("design point '{0}' has no accuracy")]
    MissingAccuracy(String),

    #[error("accuracy {acc} out of range [0, 100] for '{label}'")]
    AccuracyOutOfRange { label: String, acc: f64 },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
