//! Experiment plumbing: synthetic identity-clustered datasets, a plain-text
//! feature-file format, flat key=value experiment configs, and the grid
//! driver that turns one config into `results.csv`, `summary.txt`, and a
//! checkpoint cache.
//!
//! Everything downstream of a config is deterministic: the config and its
//! seed list fully determine every byte of the CSV output, and each
//! bandwidth × seed training combo is cached under a hash of exactly the
//! fields that influence it.

mod config;
mod data;
mod experiment;

pub use config::{
    mix_seed, sha256_hex, DataSource, ExperimentConfig, FadingProtocol, Scheme,
};
pub use data::{
    generate_synthetic, load_features, save_features, split_per_id, DatasetSplit, LabeledSet,
    SyntheticSpec,
};
pub use experiment::{
    prepare_checkpoints, run_experiment, ExperimentOutcome, ResultRow, RESULTS_HEADER,
};

use thiserror::Error;

/// Failure modes of dataset handling, config parsing, and experiment runs.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad dataset spec: {0}")]
    BadSpec(String),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: expected {expected} feature values, got {got}")]
    DimInconsistent {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Jscc(#[from] crate::jscc::JsccError),
    #[error(transparent)]
    Digital(#[from] crate::digital::DigitalError),
    #[error(transparent)]
    Retrieval(#[from] crate::retrieval::RetrievalError),
}
