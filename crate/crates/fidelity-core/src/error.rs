//! Error type shared by the core analysis stages.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text. `line` is the 1-based physical line number in
    /// the stream being parsed.
    #[error("{msg} at line {line}")]
    Parse { line: usize, msg: String },

    /// A layout failed structural validation for its task.
    #[error("layout validation: {0}")]
    Layout(String),

    /// An operation was handed arguments that violate its contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Attempt segmentation or anchor location failed; the message names the
    /// rule that could not be satisfied.
    #[error("extraction: {0}")]
    Extraction(String),

    /// Circle-centre estimation could not produce a usable estimate.
    #[error("circle estimation: {0}")]
    Estimation(String),

    /// A metric could not be computed for a segment.
    #[error("metrics: {0}")]
    Metrics(String),

    /// Steering-model fitting failed (no excitation, no bursts, ...).
    #[error("model fit: {0}")]
    Fit(String),

    /// Effect-size comparison failed (degenerate samples, missing baseline).
    #[error("effect comparison: {0}")]
    Effect(String),

    /// A synthetic drive could not be completed (divergence, bad config).
    #[error("simulation: {0}")]
    Sim(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
