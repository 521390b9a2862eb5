use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid market specification: {0}")]
    InvalidSpec(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    /// Bad observation in a price series. `index` is zero-based into the series.
    #[error("data error at index {index}: {reason}")]
    Data { index: usize, reason: String },

    /// An estimation window or mirror window reaches before the first available price.
    #[error("estimation window at step {step} needs price index {needed} but history starts at {available}")]
    Window {
        step: isize,
        needed: isize,
        available: isize,
    },

    #[error("series too short: {len} prices, at least {required} required")]
    ShortSeries { len: usize, required: usize },

    #[error("insufficient sample: {len} observations, at least {required} required")]
    InsufficientSample { len: usize, required: usize },

    #[error("ratio undefined: {0}")]
    UndefinedRatio(&'static str),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(&'static str),

    #[error("zero wealth at step {0}; risky weight undefined")]
    DegenerateWeight(usize),

    #[error("strategy {0} needs true market parameters but the path carries none")]
    MissingTruth(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("price file {path}: row {row}: {reason}")]
    PriceFile {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
