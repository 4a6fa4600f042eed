//! Dataset files, synthetic generators and budget calibration.

mod calibrate;
mod load;
mod synth;

pub use calibrate::{calibrate_max_budget, round_up_budget};
pub use load::{load_bundle, save_bundle, BundlePaths};
pub use synth::{synth_matrix_completion, synth_multilabel, SynthMatrix};

use std::path::PathBuf;

use thiserror::Error;

use crate::mtp::{MtpDataset, MtpError};

pub const FORMAT_VERSION: u32 = 1;

/// Train data, an optional test file sharing its vocabulary, and where they
/// came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub train: MtpDataset,
    pub test: Option<MtpDataset>,
    pub paths: BundlePaths,
    pub format_version: u32,
}

impl DatasetBundle {
    pub fn new(train: MtpDataset, test: Option<MtpDataset>) -> Self {
        Self {
            train,
            test,
            paths: BundlePaths::default(),
            format_version: FORMAT_VERSION,
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}:{line}: {message}")]
    Parse { file: PathBuf, line: u64, message: String },
    #[error("{file}:{line}: duplicate cell ({instance}, {target})")]
    DuplicateCell {
        file: PathBuf,
        line: u64,
        instance: String,
        target: String,
    },
    #[error("{file}:{line}: id `{id}` does not occur in the score files")]
    UnknownId { file: PathBuf, line: u64, id: String },
    #[error("{file}:{line}: column `{column}` value `{value}` is not numeric")]
    NonNumeric {
        file: PathBuf,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{file}: no feature row for id `{id}`")]
    MissingFeatures { file: PathBuf, id: String },
    #[error("{file}: {source}")]
    Io { file: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Mtp(#[from] MtpError),
}
