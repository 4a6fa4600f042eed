//! Response-surface models and acquisition functions used by the
//! model-based tuners.

mod acquisition;
mod forest;
mod kde;

pub use acquisition::{expected_improvement, normal_cdf, normal_pdf, EiCandidatePool};
pub use forest::{RandomForest, RegressionTree};
pub use kde::{Kde, KdePair, DEFAULT_GAMMA, DEFAULT_KDE_CANDIDATES};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SurrogateError {
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("observation has dimension {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("observation loss is not finite")]
    NonFiniteLoss,
}

/// One evaluated configuration in encoded form.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub budget: u32,
    pub loss: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, budget: u32, loss: f64) -> Self {
        Self { x, budget, loss }
    }
}

fn check_observations(observations: &[Observation]) -> Result<usize, SurrogateError> {
    let dim = observations.first().map(|o| o.x.len()).unwrap_or(0);
    for o in observations {
        if o.x.len() != dim {
            return Err(SurrogateError::DimensionMismatch {
                expected: dim,
                actual: o.x.len(),
            });
        }
        if !o.loss.is_finite() {
            return Err(SurrogateError::NonFiniteLoss);
        }
    }
    Ok(dim)
}
