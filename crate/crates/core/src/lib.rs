//! Hyperparameter tuning for multi-target prediction.
//!
//! The crate routes a dataset to its problem setting, trains a two-branch
//! embedding network, and tunes it with random search, Hyperband, BOHB or a
//! random-forest SMAC variant behind a single ask/tell scheduler.

pub mod data;
pub mod hpo;
pub mod metrics;
pub mod mtp;
pub mod net;
pub mod objective;
pub mod space;
pub mod surrogate;

pub use data::{load_bundle, save_bundle, DataError, DatasetBundle};
pub use hpo::{
    hyperband_brackets, promote, run, sh_schedule, Action, Evaluation, HpoError, Method, Objective, RunOptions,
    RunOutput, Scheduler, Trial, TrialId, TrialLedger, TrialOutcome, TrialStatus, TunerSpec,
};
pub use metrics::{Direction, IncumbentTrajectory, MetricError, MetricSpec, ScoredCell};
pub use mtp::{
    auto_answer, infer_setting, validation_setting, Answers, MtpDataset, MtpError, MtpSetting, Triplet,
    ValidationSetting,
};
pub use net::{Checkpoint, LossKind, NetError, TwoBranchModel};
pub use objective::{default_space, MtpObjective};
pub use space::{ConfigSpace, Configuration, ParamSpec, SpaceError, Value};
