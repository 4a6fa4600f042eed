use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mtp::{MtpDataset, Triplet};

use super::model::{BranchInput, TwoBranchModel};
use super::{Checkpoint, LossKind, NetError, Side};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: u32,
    pub loss: LossKind,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, batch_size: usize, loss: LossKind, seed: u64) -> Self {
        Self {
            learning_rate,
            batch_size,
            patience: 10,
            loss,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(NetError::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(NetError::InvalidConfig("patience must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Validation loss of every epoch run by this call.
    pub history: Vec<f64>,
}

impl TrainOutcome {
    pub fn val_loss(&self) -> f64 {
        self.checkpoint.best_val_loss
    }
}

fn fresh_state(model: &TwoBranchModel, seed: u64) -> Checkpoint {
    let p = model.n_params();
    Checkpoint {
        shapes: model.shapes(),
        params: model.params().to_vec(),
        best_params: model.params().to_vec(),
        adam_m: vec![0.0; p],
        adam_v: vec![0.0; p],
        adam_step: 0,
        epoch: 0,
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        epochs_since_improvement: 0,
        stopped: false,
        seed,
    }
}

/// Shuffle order for one epoch, a pure function of (seed, epoch).
fn epoch_order(seed: u64, epoch: u32, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(epoch));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

fn adam_step(state: &mut Checkpoint, grad: &[f64], lr: f64) {
    state.adam_step += 1;
    let t = state.adam_step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (((w, m), v), g) in state
        .params
        .iter_mut()
        .zip(&mut state.adam_m)
        .zip(&mut state.adam_v)
        .zip(grad)
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
    }
}

/// Mini-batch Adam up to `budget_epochs` total epochs.
///
/// Starts from `resume_from` when given, otherwise from the model's current
/// weights. On return the model holds the last-epoch weights; the best
/// validation epoch's weights are in `checkpoint.best_params`. An empty
/// validation set falls back to the training loss.
pub fn train(
    model: &mut TwoBranchModel,
    dataset: &MtpDataset,
    train: &[Triplet],
    validation: &[Triplet],
    cfg: &TrainConfig,
    budget_epochs: u32,
    resume_from: Option<&Checkpoint>,
) -> Result<TrainOutcome, NetError> {
    cfg.validate()?;
    if model.output_kind() != cfg.loss.output() {
        return Err(NetError::InvalidConfig(format!(
            "{:?} loss needs {:?} output",
            cfg.loss,
            cfg.loss.output()
        )));
    }
    if cfg.loss == LossKind::Bce {
        if let Some(t) = train
            .iter()
            .chain(validation)
            .find(|t| t.score != 0.0 && t.score != 1.0)
        {
            return Err(NetError::NonBinaryScore(t.score));
        }
    }
    let mut state = match resume_from {
        Some(c) => {
            if c.shapes != model.shapes() {
                return Err(NetError::CheckpointMismatch("tensor shapes differ".into()));
            }
            if c.seed != cfg.seed {
                return Err(NetError::CheckpointMismatch(format!(
                    "checkpoint seed {} differs from {}",
                    c.seed, cfg.seed
                )));
            }
            if budget_epochs < c.epoch {
                return Err(NetError::BudgetBelowCheckpoint {
                    current: c.epoch,
                    budget: budget_epochs,
                });
            }
            c.clone()
        }
        None => fresh_state(model, cfg.seed),
    };
    let val_set = if validation.is_empty() { train } else { validation };
    let mut grad = vec![0.0; state.params.len()];
    let mut history = Vec::new();
    let mut batch = Vec::with_capacity(cfg.batch_size);

    while state.epoch < budget_epochs && !state.stopped && !train.is_empty() {
        let epoch = state.epoch + 1;
        for chunk in epoch_order(cfg.seed, state.epoch, train.len()).chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i]));
            grad.iter_mut().for_each(|g| *g = 0.0);
            model.params_mut().copy_from_slice(&state.params);
            let l = model.loss_and_gradient(dataset, &batch, cfg.loss, Some(&mut grad));
            if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(NetError::Diverged { epoch });
            }
            adam_step(&mut state, &grad, cfg.learning_rate);
        }
        model.params_mut().copy_from_slice(&state.params);
        state.epoch = epoch;
        let val = model.loss_and_gradient(dataset, val_set, cfg.loss, None);
        if !val.is_finite() {
            return Err(NetError::Diverged { epoch });
        }
        history.push(val);
        if val < state.best_val_loss {
            state.best_val_loss = val;
            state.best_epoch = epoch;
            state.best_params.copy_from_slice(&state.params);
            state.epochs_since_improvement = 0;
        } else {
            state.epochs_since_improvement += 1;
            if state.epochs_since_improvement >= cfg.patience {
                state.stopped = true;
            }
        }
    }
    model.params_mut().copy_from_slice(&state.params);
    Ok(TrainOutcome {
        checkpoint: state,
        history,
    })
}

/// Output-space predictions for `pairs`. A side encoded one-hot can only
/// embed ids that occur in `train`.
pub fn predict_pairs(
    model: &TwoBranchModel,
    dataset: &MtpDataset,
    pairs: &[(usize, usize)],
    train: &[Triplet],
) -> Result<Vec<f64>, NetError> {
    let vocab = |side: Side, n: usize| -> Option<Vec<bool>> {
        match model.branch_input(side) {
            BranchInput::OneHot(_) => {
                let mut seen = vec![false; n];
                for t in train {
                    let i = match side {
                        Side::Instance => t.instance,
                        Side::Target => t.target,
                    };
                    seen[i] = true;
                }
                Some(seen)
            }
            BranchInput::Features(_) => None,
        }
    };
    let inst_vocab = vocab(Side::Instance, dataset.n_instances());
    let targ_vocab = vocab(Side::Target, dataset.n_targets());
    pairs
        .iter()
        .map(|&(i, j)| {
            if inst_vocab.as_ref().is_some_and(|v| !v[i]) {
                return Err(NetError::Infeasible {
                    side: Side::Instance,
                    index: i,
                });
            }
            if targ_vocab.as_ref().is_some_and(|v| !v[j]) {
                return Err(NetError::Infeasible {
                    side: Side::Target,
                    index: j,
                });
            }
            let x = model.input_for(Side::Instance, i, dataset.instance_features.as_ref());
            let t = model.input_for(Side::Target, j, dataset.target_features.as_ref());
            Ok(model.forward(x, t))
        })
        .collect()
}
