use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::MtpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreType {
    Binary,
    Nominal,
    Ordinal,
    Real,
}

impl ScoreType {
    pub fn is_classification(self) -> bool {
        matches!(self, ScoreType::Binary)
    }
}

/// Row-major dense feature matrix, one row per id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self, MtpError> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(MtpError::Invalid(format!(
                "feature matrix of {} values cannot have {dim} columns",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MtpError::Invalid("feature matrix has non-finite values".into()));
        }
        Ok(Self { dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MtpError> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(MtpError::Invalid("ragged feature rows".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub instance: usize,
    pub target: usize,
    pub score: f64,
}

impl Triplet {
    pub fn new(instance: usize, target: usize, score: f64) -> Self {
        Self {
            instance,
            target,
            score,
        }
    }
}

/// Instances, targets, optional side information, and observed scores.
///
/// Indices in the triplets refer to positions in `instance_ids` and
/// `target_ids`; feature matrices (when present) have one row per id.
#[derive(Debug, Clone, PartialEq)]
pub struct MtpDataset {
    pub instance_ids: Vec<String>,
    pub target_ids: Vec<String>,
    pub instance_features: Option<FeatureMatrix>,
    pub target_features: Option<FeatureMatrix>,
    pub triplets: Vec<Triplet>,
    pub score_type: ScoreType,
}

impl MtpDataset {
    pub fn new(
        instance_ids: Vec<String>,
        target_ids: Vec<String>,
        instance_features: Option<FeatureMatrix>,
        target_features: Option<FeatureMatrix>,
        triplets: Vec<Triplet>,
        score_type: ScoreType,
    ) -> Result<Self, MtpError> {
        let d = Self {
            instance_ids,
            target_ids,
            instance_features,
            target_features,
            triplets,
            score_type,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), MtpError> {
        let (n, m) = (self.n_instances(), self.n_targets());
        if let Some(f) = &self.instance_features {
            if f.rows() != n {
                return Err(MtpError::Invalid(format!(
                    "instance features have {} rows for {n} instances",
                    f.rows()
                )));
            }
        }
        if let Some(f) = &self.target_features {
            if f.rows() != m {
                return Err(MtpError::Invalid(format!(
                    "target features have {} rows for {m} targets",
                    f.rows()
                )));
            }
        }
        let mut seen = HashSet::with_capacity(self.triplets.len());
        for t in &self.triplets {
            if t.instance >= n || t.target >= m {
                return Err(MtpError::Invalid(format!(
                    "triplet ({}, {}) out of range {n}x{m}",
                    t.instance, t.target
                )));
            }
            if !seen.insert((t.instance, t.target)) {
                return Err(MtpError::DuplicateCell {
                    instance: self.instance_ids[t.instance].clone(),
                    target: self.target_ids[t.target].clone(),
                });
            }
            if !t.score.is_finite() {
                return Err(MtpError::Invalid("non-finite score".into()));
            }
            if self.score_type == ScoreType::Binary && t.score != 0.0 && t.score != 1.0 {
                return Err(MtpError::Invalid(format!(
                    "binary score type but found value {}",
                    t.score
                )));
            }
        }
        Ok(())
    }

    pub fn n_instances(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn n_targets(&self) -> usize {
        self.target_ids.len()
    }

    /// Same vocabulary and side information with a different set of triplets.
    pub fn with_triplets(&self, triplets: Vec<Triplet>) -> Self {
        Self {
            triplets,
            ..self.clone()
        }
    }

    pub fn observed_instances(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n_instances()];
        for t in &self.triplets {
            seen[t.instance] = true;
        }
        seen
    }

    pub fn observed_targets(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n_targets()];
        for t in &self.triplets {
            seen[t.target] = true;
        }
        seen
    }

    /// Mean observed score per target (NaN for targets without triplets).
    pub fn target_means(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.n_targets()];
        let mut count = vec![0usize; self.n_targets()];
        for t in &self.triplets {
            sum[t.target] += t.score;
            count[t.target] += 1;
        }
        sum.iter()
            .zip(&count)
            .map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
            .collect()
    }

    pub fn global_mean(&self) -> f64 {
        self.triplets.iter().map(|t| t.score).sum::<f64>() / self.triplets.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn rejects_duplicate_pairs() {
        let err = MtpDataset::new(
            ids("i", 2),
            ids("t", 2),
            None,
            None,
            vec![Triplet::new(0, 1, 1.0), Triplet::new(0, 1, 0.0)],
            ScoreType::Binary,
        )
        .unwrap_err();
        assert!(matches!(err, MtpError::DuplicateCell { .. }));
    }

    #[test]
    fn rejects_non_binary_scores() {
        assert!(MtpDataset::new(
            ids("i", 1),
            ids("t", 1),
            None,
            None,
            vec![Triplet::new(0, 0, 0.5)],
            ScoreType::Binary,
        )
        .is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(MtpDataset::new(
            ids("i", 1),
            ids("t", 1),
            None,
            None,
            vec![Triplet::new(1, 0, 0.5)],
            ScoreType::Real,
        )
        .is_err());
    }
}
