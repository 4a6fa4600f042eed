//! Evaluation metrics and cross-dataset ranking of tuning methods.

mod classification;
mod ranking;
mod regression;

pub use classification::{aupr, auroc, macro_aupr, macro_auroc, micro_aupr, micro_auroc};
pub use ranking::{
    average_ranks, rank_over_time, DatasetTrajectories, IncumbentTrajectory, RankingTable, TrajectoryPoint,
    RANKING_CSV_HEADER, TRAJECTORY_CSV_HEADER,
};
pub use regression::{macro_rrmse, micro_rmse};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mtp::MtpSetting;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no positive labels")]
    NoPositives,
    #[error("no negative labels")]
    NoNegatives,
    #[error("no target with both classes (or non-zero variance)")]
    NoValidTarget,
    #[error("classification metric requires binary truth values")]
    NonBinary,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("scores contain NaN")]
    NonFinite,
    #[error("no cells to evaluate")]
    Empty,
    #[error("no training mean for target {0}")]
    MissingTargetMean(usize),
    #[error("invalid trajectory: {0}")]
    Trajectory(String),
    #[error("{0}")]
    Ranking(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

/// One observed test cell with its prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCell {
    pub instance: usize,
    pub target: usize,
    pub truth: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Auroc,
    Aupr,
    Rmse,
    Rrmse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Macro,
    Micro,
}

/// A headline metric together with its averaging scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: MetricName,
    pub averaging: Averaging,
}

impl MetricSpec {
    pub const MACRO_AUPR: Self = Self::new_unchecked(MetricName::Aupr, Averaging::Macro);
    pub const MICRO_AUPR: Self = Self::new_unchecked(MetricName::Aupr, Averaging::Micro);
    pub const MACRO_AUROC: Self = Self::new_unchecked(MetricName::Auroc, Averaging::Macro);
    pub const MICRO_AUROC: Self = Self::new_unchecked(MetricName::Auroc, Averaging::Micro);
    pub const MICRO_RMSE: Self = Self::new_unchecked(MetricName::Rmse, Averaging::Micro);
    pub const MACRO_RRMSE: Self = Self::new_unchecked(MetricName::Rrmse, Averaging::Macro);

    const fn new_unchecked(name: MetricName, averaging: Averaging) -> Self {
        Self { name, averaging }
    }

    pub fn new(name: MetricName, averaging: Averaging) -> Result<Self, MetricError> {
        match (name, averaging) {
            (MetricName::Rrmse, Averaging::Micro) => Err(MetricError::UnknownMetric("micro_rrmse".into())),
            (MetricName::Rmse, Averaging::Macro) => Err(MetricError::UnknownMetric("macro_rmse".into())),
            _ => Ok(Self { name, averaging }),
        }
    }

    pub fn direction(self) -> Direction {
        match self.name {
            MetricName::Auroc | MetricName::Aupr => Direction::HigherIsBetter,
            MetricName::Rmse | MetricName::Rrmse => Direction::LowerIsBetter,
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(self.name, MetricName::Auroc | MetricName::Aupr)
    }

    /// The conventional headline metric for a problem setting.
    pub fn for_setting(setting: MtpSetting) -> Self {
        match setting {
            MtpSetting::MultiLabelClassification
            | MtpSetting::MultiTaskLearning
            | MtpSetting::HierarchicalMultiLabelClassification
            | MtpSetting::MultiDimensionalClassification => Self::MACRO_AUPR,
            MtpSetting::DyadicPrediction
            | MtpSetting::ZeroShotLearning
            | MtpSetting::ColdStartCollaborativeFiltering => Self::MICRO_AUPR,
            MtpSetting::MultivariateRegression => Self::MACRO_RRMSE,
            MtpSetting::MatrixCompletion | MtpSetting::HybridMatrixCompletion => Self::MICRO_RMSE,
        }
    }

    /// `train_means` is only consulted for RRMSE.
    pub fn evaluate(self, cells: &[ScoredCell], train_means: &[f64]) -> Result<f64, MetricError> {
        match (self.name, self.averaging) {
            (MetricName::Aupr, Averaging::Macro) => macro_aupr(cells),
            (MetricName::Aupr, Averaging::Micro) => micro_aupr(cells),
            (MetricName::Auroc, Averaging::Macro) => macro_auroc(cells),
            (MetricName::Auroc, Averaging::Micro) => micro_auroc(cells),
            (MetricName::Rmse, _) => micro_rmse(cells),
            (MetricName::Rrmse, _) => macro_rrmse(cells, train_means),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let avg = match self.averaging {
            Averaging::Macro => "macro",
            Averaging::Micro => "micro",
        };
        let name = match self.name {
            MetricName::Auroc => "auroc",
            MetricName::Aupr => "aupr",
            MetricName::Rmse => "rmse",
            MetricName::Rrmse => "rrmse",
        };
        write!(f, "{avg}_{name}")
    }
}

impl FromStr for MetricSpec {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let (avg, name) = norm
            .split_once('_')
            .ok_or_else(|| MetricError::UnknownMetric(s.to_string()))?;
        let averaging = match avg {
            "macro" => Averaging::Macro,
            "micro" => Averaging::Micro,
            _ => return Err(MetricError::UnknownMetric(s.to_string())),
        };
        let name = match name {
            "auroc" => MetricName::Auroc,
            "aupr" => MetricName::Aupr,
            "rmse" => MetricName::Rmse,
            "rrmse" => MetricName::Rrmse,
            _ => return Err(MetricError::UnknownMetric(s.to_string())),
        };
        Self::new(name, averaging).map_err(|_| MetricError::UnknownMetric(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_round_trip() {
        for m in [
            MetricSpec::MACRO_AUPR,
            MetricSpec::MICRO_AUPR,
            MetricSpec::MACRO_AUROC,
            MetricSpec::MICRO_AUROC,
            MetricSpec::MICRO_RMSE,
            MetricSpec::MACRO_RRMSE,
        ] {
            assert_eq!(m.to_string().parse::<MetricSpec>().unwrap(), m);
        }
        assert!("micro_rrmse".parse::<MetricSpec>().is_err());
    }

    #[test]
    fn directions() {
        assert_eq!(MetricSpec::MACRO_AUPR.direction(), Direction::HigherIsBetter);
        assert_eq!(MetricSpec::MICRO_RMSE.direction(), Direction::LowerIsBetter);
    }
}
