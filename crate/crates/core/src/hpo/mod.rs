//! Ask/tell hyperparameter tuning: random search, Hyperband, BOHB and a
//! random-forest SMAC variant, with a JSONL trial ledger.

mod driver;
mod ledger;
mod schedule;
mod scheduler;

pub use driver::{run, Evaluation, Objective, ObjectiveError, RunOptions, RunOutput};
pub use ledger::{RunHeader, Trial, TrialLedger, TrialStatus};
pub use schedule::{bracket_cost, hyperband_brackets, hyperband_cycle_cost, promote, s_max, sh_schedule, BracketSpec};
pub use scheduler::{bohb_fit_level, Action, Scheduler, TrialOutcome, TrialRequest, TunerSpec};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type TrialId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "random2x")]
    Random2x,
    #[serde(rename = "hyperband")]
    Hyperband,
    #[serde(rename = "bohb")]
    Bohb,
    #[serde(rename = "smac")]
    Smac,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Random,
        Method::Random2x,
        Method::Hyperband,
        Method::Bohb,
        Method::Smac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Random2x => "random2x",
            Method::Hyperband => "hyperband",
            Method::Bohb => "bohb",
            Method::Smac => "smac",
        }
    }

    pub fn is_multi_fidelity(self) -> bool {
        matches!(self, Method::Hyperband | Method::Bohb)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HpoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HpoError::InvalidSpec(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Error)]
pub enum HpoError {
    #[error("eta must be at least 2, got {0}")]
    InvalidEta(u32),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid tuner spec: {0}")]
    InvalidSpec(String),
    #[error("unknown or already finished trial {0}")]
    UnknownTrial(TrialId),
    #[error("ledger: {0}")]
    Ledger(String),
    #[error("ledger does not match this tuner: {0}")]
    ReplayMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
