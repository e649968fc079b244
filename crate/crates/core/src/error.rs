use thiserror::Error;

use crate::signal::GestureClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("annotation {index} [{start}, {end}) cannot be cropped to the requested window")]
    EdgeClipped {
        index: usize,
        start: usize,
        end: usize,
    },

    #[error("class {0:?} is not a ground-truth gesture class")]
    InvalidClass(GestureClass),

    #[error("window of {len} samples is too short for {what}")]
    TooShort { what: &'static str, len: usize },

    #[error("feature entry {index}: {source}")]
    FeatureEntry {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("feature {index} is constant over the fit set")]
    DegenerateFeature { index: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    DivergedTraining { epoch: usize },

    #[error("split infeasible: {0}")]
    SplitInfeasible(String),

    #[error("model format: {0}")]
    Format(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
