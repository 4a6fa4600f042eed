//! Two-branch network: instance and target embeddings joined by a head.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{Checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{BranchInput, Input, TensorInfo, TwoBranchModel};
pub use train::{predict_pairs, train, TrainConfig, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Logistic,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bce,
    Mse,
}

impl LossKind {
    pub fn output(self) -> OutputKind {
        match self {
            LossKind::Bce => OutputKind::Logistic,
            LossKind::Mse => OutputKind::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Instance,
    Target,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Instance => "instance",
            Side::Target => "target",
        })
    }
}

/// Shape of one branch. `width` is the size of hidden layers and is unused
/// when `n_layers == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub n_layers: usize,
    pub width: usize,
    pub embedding_dim: usize,
    pub activation: Activation,
}

impl BranchSpec {
    pub fn lookup(embedding_dim: usize) -> Self {
        Self {
            n_layers: 1,
            width: 0,
            embedding_dim,
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadSpec {
    Dot,
    Mlp {
        /// Must equal twice the embedding size.
        input_dim: usize,
        hidden: Vec<usize>,
        activation: Activation,
    },
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("binary cross-entropy needs scores in {{0, 1}}, got {0}")]
    NonBinaryScore(f64),
    #[error("length mismatch: {0} predictions, {1} scores")]
    LengthMismatch(usize, usize),
    #[error("{side} id {index} was not seen in training; a one-hot {side} branch cannot embed it")]
    Infeasible { side: Side, index: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: u32 },
    #[error("checkpoint does not fit this model: {0}")]
    CheckpointMismatch(String),
    #[error("cannot resume at epoch {current} with budget {budget}")]
    BudgetBelowCheckpoint { current: u32, budget: u32 },
}

/// Mean loss of output-space predictions against scores. Binary
/// cross-entropy works from probabilities via `ln_1p` so that values near 0
/// and 1 keep their precision.
pub fn loss(predictions: &[f64], scores: &[f64], kind: LossKind) -> Result<f64, NetError> {
    if predictions.len() != scores.len() {
        return Err(NetError::LengthMismatch(predictions.len(), scores.len()));
    }
    if predictions.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (&p, &y) in predictions.iter().zip(scores) {
        total += match kind {
            LossKind::Mse => (p - y).powi(2),
            LossKind::Bce => {
                if y != 0.0 && y != 1.0 {
                    return Err(NetError::NonBinaryScore(y));
                }
                let p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                if y == 1.0 {
                    -p.ln()
                } else {
                    -(-p).ln_1p()
                }
            }
        };
    }
    Ok(total / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&[1.0, -2.0], &[1.0, -2.0], LossKind::Mse).unwrap(), 0.0);
        assert_abs_diff_eq!(
            loss(&[0.5; 4], &[0.0, 1.0, 1.0, 0.0], LossKind::Bce).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            loss(&[0.9], &[1.0], LossKind::Bce).unwrap(),
            0.1053605156578263,
            epsilon = 1e-12
        );
    }

    #[test]
    fn bce_rejects_real_scores() {
        assert!(matches!(
            loss(&[0.5], &[0.3], LossKind::Bce),
            Err(NetError::NonBinaryScore(_))
        ));
        assert!(matches!(
            loss(&[0.5], &[], LossKind::Mse),
            Err(NetError::LengthMismatch(1, 0))
        ));
    }
}
