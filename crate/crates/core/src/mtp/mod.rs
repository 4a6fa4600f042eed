//! Multi-target prediction data model, problem-setting router, and splits.

mod dataset;
mod questionnaire;
mod split;

pub use dataset::{FeatureMatrix, MtpDataset, ScoreType, Triplet};
pub use questionnaire::{
    auto_answer, infer_setting, nearest_rows, validation_setting, Answers, AutoAnswerOptions, MtpSetting, ScoreAnswer,
    TableRow, TargetSideInfo, ValidationSetting, DECISION_TABLE,
};
pub use split::{split, split_train_validation, Folds, SplitPlan};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MtpError {
    #[error("duplicate cell ({instance}, {target})")]
    DuplicateCell { instance: String, target: String },
    #[error("training set has no triplets")]
    EmptyTrain,
    #[error("{0}")]
    EmptyFold(String),
    #[error("{0}")]
    Invalid(String),
}
