//! The six-question questionnaire and the decision table that maps answers
//! onto multi-target prediction problem settings.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MtpDataset, MtpError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSideInfo {
    No,
    Yes,
    YesHierarchy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreAnswer {
    Binary,
    Nominal,
    Ordinal,
    Real,
    /// The user does not constrain the score type.
    Any,
}

/// Answers to Q1..Q6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Answers {
    /// Novel instances expected at test time.
    pub q1: bool,
    /// Novel targets expected at test time.
    pub q2: bool,
    /// Instance side information available.
    pub q3: bool,
    /// Target side information available (optionally hierarchical).
    pub q4: TargetSideInfo,
    /// Score matrix fully observed.
    pub q5: bool,
    pub q6: ScoreAnswer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MtpSetting {
    MultiLabelClassification,
    MultivariateRegression,
    MultiTaskLearning,
    HierarchicalMultiLabelClassification,
    DyadicPrediction,
    ZeroShotLearning,
    MatrixCompletion,
    HybridMatrixCompletion,
    ColdStartCollaborativeFiltering,
    MultiDimensionalClassification,
}

impl MtpSetting {
    pub fn name(self) -> &'static str {
        match self {
            MtpSetting::MultiLabelClassification => "multi-label classification",
            MtpSetting::MultivariateRegression => "multivariate regression",
            MtpSetting::MultiTaskLearning => "multi-task learning",
            MtpSetting::HierarchicalMultiLabelClassification => "hierarchical multi-label classification",
            MtpSetting::DyadicPrediction => "dyadic prediction",
            MtpSetting::ZeroShotLearning => "zero-shot learning",
            MtpSetting::MatrixCompletion => "matrix completion",
            MtpSetting::HybridMatrixCompletion => "hybrid matrix completion",
            MtpSetting::ColdStartCollaborativeFiltering => "cold-start collaborative filtering",
            MtpSetting::MultiDimensionalClassification => "multi-dimensional classification",
        }
    }
}

impl fmt::Display for MtpSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScorePattern {
    Exactly(ScoreAnswer),
    Wildcard,
}

/// One row of the decision table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableRow {
    pub q1: bool,
    pub q2: bool,
    pub q3: bool,
    pub q4: TargetSideInfo,
    pub q5: bool,
    q6: ScorePattern,
    pub setting: MtpSetting,
}

impl TableRow {
    /// `None` means the row accepts any score type.
    pub fn q6(&self) -> Option<ScoreAnswer> {
        match self.q6 {
            ScorePattern::Exactly(s) => Some(s),
            ScorePattern::Wildcard => None,
        }
    }

    fn matches(&self, a: &Answers) -> bool {
        self.distance(a) == 0
    }

    /// Number of questions on which `a` disagrees with this row.
    pub fn distance(&self, a: &Answers) -> usize {
        let q6_ok = match (self.q6, a.q6) {
            (ScorePattern::Wildcard, _) | (_, ScoreAnswer::Any) => true,
            (ScorePattern::Exactly(s), given) => s == given,
        };
        [
            self.q1 == a.q1,
            self.q2 == a.q2,
            self.q3 == a.q3,
            self.q4 == a.q4,
            self.q5 == a.q5,
            q6_ok,
        ]
        .iter()
        .filter(|ok| !**ok)
        .count()
    }
}

const fn row(
    q1: bool,
    q2: bool,
    q3: bool,
    q4: TargetSideInfo,
    q5: bool,
    q6: ScorePattern,
    setting: MtpSetting,
) -> TableRow {
    TableRow {
        q1,
        q2,
        q3,
        q4,
        q5,
        q6,
        setting,
    }
}

use ScorePattern::{Exactly, Wildcard};
use TargetSideInfo::{No, Yes, YesHierarchy};

pub const DECISION_TABLE: [TableRow; 10] = [
    row(
        true,
        false,
        true,
        No,
        true,
        Exactly(ScoreAnswer::Binary),
        MtpSetting::MultiLabelClassification,
    ),
    row(
        true,
        false,
        true,
        No,
        true,
        Exactly(ScoreAnswer::Real),
        MtpSetting::MultivariateRegression,
    ),
    row(true, false, true, No, false, Wildcard, MtpSetting::MultiTaskLearning),
    row(
        true,
        false,
        true,
        YesHierarchy,
        true,
        Exactly(ScoreAnswer::Binary),
        MtpSetting::HierarchicalMultiLabelClassification,
    ),
    row(true, false, true, Yes, false, Wildcard, MtpSetting::DyadicPrediction),
    row(true, true, true, Yes, false, Wildcard, MtpSetting::ZeroShotLearning),
    row(false, false, false, No, false, Wildcard, MtpSetting::MatrixCompletion),
    row(
        false,
        false,
        true,
        Yes,
        false,
        Wildcard,
        MtpSetting::HybridMatrixCompletion,
    ),
    row(
        true,
        true,
        true,
        Yes,
        false,
        Wildcard,
        MtpSetting::ColdStartCollaborativeFiltering,
    ),
    row(
        true,
        false,
        true,
        No,
        true,
        Exactly(ScoreAnswer::Nominal),
        MtpSetting::MultiDimensionalClassification,
    ),
];

/// All decision-table settings matching `answers`, in table order.
pub fn infer_setting(answers: &Answers) -> Vec<MtpSetting> {
    DECISION_TABLE
        .iter()
        .filter(|r| r.matches(answers))
        .map(|r| r.setting)
        .collect()
}

/// Table rows at the minimum non-zero distance from `answers`.
pub fn nearest_rows(answers: &Answers) -> (usize, Vec<&'static TableRow>) {
    let best = DECISION_TABLE
        .iter()
        .map(|r| r.distance(answers))
        .filter(|d| *d > 0)
        .min()
        .unwrap_or(0);
    let rows = DECISION_TABLE.iter().filter(|r| r.distance(answers) == best).collect();
    (best, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValidationSetting {
    /// Missing cells of the score matrix.
    A,
    /// Novel instances.
    B,
    /// Novel targets.
    C,
    /// Novel instance-target pairs.
    D,
}

impl ValidationSetting {
    pub fn describe(self) -> &'static str {
        match self {
            ValidationSetting::A => "missing values inside the score matrix",
            ValidationSetting::B => "novel instances",
            ValidationSetting::C => "novel targets",
            ValidationSetting::D => "novel instance-target pairs",
        }
    }
}

impl fmt::Display for ValidationSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ValidationSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            other => Err(format!("unknown validation setting `{other}` (expected A-D)")),
        }
    }
}

pub fn validation_setting(novel_instances: bool, novel_targets: bool) -> ValidationSetting {
    match (novel_instances, novel_targets) {
        (false, false) => ValidationSetting::A,
        (true, false) => ValidationSetting::B,
        (false, true) => ValidationSetting::C,
        (true, true) => ValidationSetting::D,
    }
}

#[derive(Debug, Clone)]
pub struct AutoAnswerOptions {
    /// More than this many distinct non-binary values classifies scores as real.
    pub real_threshold: usize,
    /// Target side information describes a hierarchy (never detected automatically).
    pub hierarchy: bool,
    /// Overrides the detected score type.
    pub score_type: Option<ScoreAnswer>,
}

impl Default for AutoAnswerOptions {
    fn default() -> Self {
        Self {
            real_threshold: 20,
            hierarchy: false,
            score_type: None,
        }
    }
}

/// Answers the questionnaire from the data itself. `train` and `test` share a
/// vocabulary; novelty is judged by which ids occur in the train triplets.
pub fn auto_answer(
    train: &MtpDataset,
    test: Option<&MtpDataset>,
    opts: &AutoAnswerOptions,
) -> Result<Answers, MtpError> {
    if train.triplets.is_empty() {
        return Err(MtpError::EmptyTrain);
    }
    let seen_i = train.observed_instances();
    let seen_t = train.observed_targets();
    let n_seen = seen_i.iter().filter(|s| **s).count();
    let m_seen = seen_t.iter().filter(|s| **s).count();
    let fully_observed = train.triplets.len() == n_seen * m_seen;

    let (q1, q2) = match test {
        Some(test) => (
            test.triplets
                .iter()
                .any(|t| !seen_i.get(t.instance).copied().unwrap_or(false)),
            test.triplets
                .iter()
                .any(|t| !seen_t.get(t.target).copied().unwrap_or(false)),
        ),
        None => (false, false),
    };

    let q4 = match (train.target_features.is_some(), opts.hierarchy) {
        (false, _) => TargetSideInfo::No,
        (true, false) => TargetSideInfo::Yes,
        (true, true) => TargetSideInfo::YesHierarchy,
    };

    let q6 = opts
        .score_type
        .unwrap_or_else(|| detect_score_type(train, opts.real_threshold));

    Ok(Answers {
        q1,
        q2,
        q3: train.instance_features.is_some(),
        q4,
        q5: fully_observed,
        q6,
    })
}

fn detect_score_type(d: &MtpDataset, real_threshold: usize) -> ScoreAnswer {
    if d.triplets.iter().all(|t| t.score == 0.0 || t.score == 1.0) {
        return ScoreAnswer::Binary;
    }
    let distinct: BTreeSet<u64> = d.triplets.iter().map(|t| t.score.to_bits()).collect();
    if distinct.len() > real_threshold {
        ScoreAnswer::Real
    } else {
        ScoreAnswer::Nominal
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

impl fmt::Display for Answers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q4 = match self.q4 {
            TargetSideInfo::No => "no",
            TargetSideInfo::Yes => "yes",
            TargetSideInfo::YesHierarchy => "yes (hierarchy)",
        };
        let q6 = match self.q6 {
            ScoreAnswer::Binary => "binary",
            ScoreAnswer::Nominal => "nominal",
            ScoreAnswer::Ordinal => "ordinal",
            ScoreAnswer::Real => "real-valued",
            ScoreAnswer::Any => "any",
        };
        write!(
            f,
            "Q1={} Q2={} Q3={} Q4={} Q5={} Q6={}",
            yes_no(self.q1),
            yes_no(self.q2),
            yes_no(self.q3),
            q4,
            yes_no(self.q5),
            q6
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn answers(q1: bool, q2: bool, q3: bool, q4: TargetSideInfo, q5: bool, q6: ScoreAnswer) -> Answers {
        Answers { q1, q2, q3, q4, q5, q6 }
    }

    #[test]
    fn multi_label_row() {
        let a = answers(true, false, true, No, true, ScoreAnswer::Binary);
        assert_eq!(infer_setting(&a), vec![MtpSetting::MultiLabelClassification]);
    }

    #[test]
    fn matrix_completion_row() {
        let a = answers(false, false, false, No, false, ScoreAnswer::Real);
        assert_eq!(infer_setting(&a), vec![MtpSetting::MatrixCompletion]);
    }

    #[test]
    fn zero_shot_and_cold_start_are_ambiguous() {
        let a = answers(true, true, true, Yes, false, ScoreAnswer::Real);
        assert_eq!(
            infer_setting(&a),
            vec![
                MtpSetting::ZeroShotLearning,
                MtpSetting::ColdStartCollaborativeFiltering
            ]
        );
    }

    #[test]
    fn fully_observed_featureless_matrix_matches_nothing() {
        let a = answers(false, false, false, No, true, ScoreAnswer::Real);
        assert!(infer_setting(&a).is_empty());
        let (dist, rows) = nearest_rows(&a);
        assert_eq!(dist, 1);
        assert_eq!(rows[0].setting, MtpSetting::MatrixCompletion);
    }

    #[test]
    fn any_score_type_matches_every_row_variant() {
        let a = answers(true, false, true, No, true, ScoreAnswer::Any);
        assert_eq!(
            infer_setting(&a),
            vec![
                MtpSetting::MultiLabelClassification,
                MtpSetting::MultivariateRegression,
                MtpSetting::MultiDimensionalClassification
            ]
        );
    }

    #[test]
    fn validation_settings() {
        assert_eq!(validation_setting(false, false), ValidationSetting::A);
        assert_eq!(validation_setting(true, false), ValidationSetting::B);
        assert_eq!(validation_setting(false, true), ValidationSetting::C);
        assert_eq!(validation_setting(true, true), ValidationSetting::D);
    }
}
