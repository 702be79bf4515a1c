//! Error type shared across the library.

use thiserror::Error;

/// Library-wide error enumeration.
///
/// Variants are grouped by concern so a front end can map them onto
/// coarse exit categories (config / data / artifact / training).
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("calendar alignment error: overlap of {overlap} days is below 80% of the shorter series ({shorter} days)")]
    Alignment { overlap: usize, shorter: usize },

    #[error("warm-up error: need at least {needed} rows, got {got}")]
    WarmUp { needed: usize, got: usize },

    #[error("degenerate scaler: training volatility range is empty (min == max == {0})")]
    DegenerateScaler(f64),

    #[error("empty dataset: {rows} rows cannot produce any window with W={window}, H={horizon}")]
    EmptyDataset {
        rows: usize,
        window: usize,
        horizon: usize,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("batch error: {0}")]
    Batch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Divergence {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("bundle format version mismatch: found {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("bundle integrity error: {0}")]
    Integrity(String),

    #[error("coverage gap: {0}")]
    CoverageGap(String),

    #[error("degenerate ensemble: need at least 2 members, got {0}")]
    DegenerateEnsemble(usize),

    #[error("degenerate range: actual closes span zero width")]
    DegenerateRange,

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid return {0}: close returns must exceed -1")]
    InvalidReturn(f64),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
