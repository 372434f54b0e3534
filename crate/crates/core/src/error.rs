use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by model construction, learning and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance is not positive definite{}", fmt_state(.state))]
    NotPositiveDefinite { state: Option<usize> },

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("observation likelihood underflowed to zero at step {step}")]
    NumericalUnderflow { step: usize },

    #[error("no fuzzy rule fires for observation {obs:?} with action {action}")]
    ZeroFiring { obs: Vec<f64>, action: usize },

    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("invalid fuzzy model: {0}")]
    InvalidFuzzyModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("state count mismatch: learned model has {learned}, ground truth has {truth}")]
    StateCountMismatch { learned: usize, truth: usize },

    #[error("quadrature KL supports at most 3 dimensions (got {0}); use the Monte-Carlo estimator")]
    UnsupportedDimension(usize),

    #[error("cannot form {k} clusters from {distinct} distinct points")]
    DegenerateClustering { k: usize, distinct: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn fmt_state(state: &Option<usize>) -> String {
    match state {
        Some(s) => format!(" for state {s}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
