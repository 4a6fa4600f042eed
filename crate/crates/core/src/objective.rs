//! Tuning objective for multi-target prediction: build the two-branch
//! network from a configuration, train it to a budget, score the test fold.

use std::collections::BTreeMap;

use crate::hpo::{Evaluation, Objective};
use crate::metrics::{MetricSpec, ScoredCell};
use crate::mtp::{Folds, MtpDataset, ScoreType};
use crate::net::{
    predict_pairs, train, Activation, BranchSpec, Checkpoint, HeadSpec, LossKind, NetError, Side, TrainConfig,
    TrainOutcome, TwoBranchModel,
};
use crate::space::{ConfigSpace, Configuration, ParamSpec, SpaceError, Value};

/// Values used for hyperparameters a configuration does not set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelDefaults {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub embedding_dim: usize,
    pub layers: usize,
    pub layer_width: usize,
    pub activation: Activation,
    pub patience: u32,
}

impl Default for ModelDefaults {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 256,
            embedding_dim: 32,
            layers: 1,
            layer_width: 64,
            activation: Activation::Relu,
            patience: 10,
        }
    }
}

/// The default search space. Layer counts are only tunable for sides that
/// carry features; a one-hot side is a single lookup layer.
pub fn default_space(dataset: &MtpDataset) -> Result<ConfigSpace, SpaceError> {
    let mut params = vec![
        ParamSpec::real("learning_rate", 1e-4, 1e-1, true)?,
        ParamSpec::categorical("batch_size", vec![256i64, 512, 1024])?,
        ParamSpec::integer("embedding_dim", 8, 256, true)?,
    ];
    if dataset.instance_features.is_some() {
        params.push(ParamSpec::integer("instance_layers", 1, 3, false)?);
    }
    if dataset.target_features.is_some() {
        params.push(ParamSpec::integer("target_layers", 1, 3, false)?);
    }
    if dataset.instance_features.is_some() || dataset.target_features.is_some() {
        params.push(ParamSpec::integer("layer_width", 32, 512, true)?);
    }
    ConfigSpace::new(params)
}

fn positive_int(config: &Configuration, name: &str, default: usize) -> Result<usize, NetError> {
    match config.get(name) {
        None => Ok(default),
        Some(v) => match v.as_i64() {
            Some(x) if x >= 1 => Ok(x as usize),
            _ => Err(NetError::InvalidConfig(format!(
                "`{name}` must be a positive integer, got {v}"
            ))),
        },
    }
}

fn activation(config: &Configuration, default: Activation) -> Result<Activation, NetError> {
    match config.get("activation").map(Value::as_str) {
        None => Ok(default),
        Some(Some("relu")) => Ok(Activation::Relu),
        Some(Some("tanh")) => Ok(Activation::Tanh),
        Some(_) => Err(NetError::InvalidConfig("`activation` must be relu or tanh".into())),
    }
}

#[derive(Debug, Clone)]
pub struct MtpObjective {
    dataset: MtpDataset,
    folds: Folds,
    metric: MetricSpec,
    loss: LossKind,
    head: HeadSpec,
    defaults: ModelDefaults,
    seed: u64,
    train_means: Vec<f64>,
}

impl MtpObjective {
    /// `dataset` supplies the vocabulary and side information; `folds` the
    /// triplets. Fails when the test fold holds ids a one-hot branch cannot
    /// embed.
    pub fn new(dataset: MtpDataset, folds: Folds, metric: MetricSpec, seed: u64) -> Result<Self, NetError> {
        let train_set = dataset.with_triplets(folds.train.clone());
        let seen_i = train_set.observed_instances();
        let seen_t = train_set.observed_targets();
        for t in &folds.test {
            if dataset.instance_features.is_none() && !seen_i[t.instance] {
                return Err(NetError::Infeasible {
                    side: Side::Instance,
                    index: t.instance,
                });
            }
            if dataset.target_features.is_none() && !seen_t[t.target] {
                return Err(NetError::Infeasible {
                    side: Side::Target,
                    index: t.target,
                });
            }
        }
        let loss = match dataset.score_type {
            ScoreType::Binary => LossKind::Bce,
            _ => LossKind::Mse,
        };
        Ok(Self {
            train_means: train_set.target_means(),
            dataset,
            folds,
            metric,
            loss,
            head: HeadSpec::Dot,
            defaults: ModelDefaults::default(),
            seed,
        })
    }

    pub fn with_head(mut self, head: HeadSpec) -> Self {
        self.head = head;
        self
    }

    pub fn with_defaults(mut self, defaults: ModelDefaults) -> Self {
        self.defaults = defaults;
        self
    }

    pub fn dataset(&self) -> &MtpDataset {
        &self.dataset
    }

    pub fn folds(&self) -> &Folds {
        &self.folds
    }

    pub fn metric(&self) -> MetricSpec {
        self.metric
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn build(&self, config: &Configuration) -> Result<(TwoBranchModel, TrainConfig), NetError> {
        let d = &self.defaults;
        let lr = match config.get("learning_rate") {
            None => d.learning_rate,
            Some(v) => v
                .as_f64()
                .ok_or_else(|| NetError::InvalidConfig(format!("`learning_rate` must be numeric, got {v}")))?,
        };
        let k = positive_int(config, "embedding_dim", d.embedding_dim)?;
        let width = positive_int(config, "layer_width", d.layer_width)?;
        let act = activation(config, d.activation)?;
        let branch = |name: &str, has_features: bool| -> Result<BranchSpec, NetError> {
            let n_layers = if has_features {
                positive_int(config, name, d.layers)?
            } else {
                1
            };
            Ok(BranchSpec {
                n_layers,
                width,
                embedding_dim: k,
                activation: act,
            })
        };
        let inst = branch("instance_layers", self.dataset.instance_features.is_some())?;
        let targ = branch("target_layers", self.dataset.target_features.is_some())?;
        let head = match &self.head {
            HeadSpec::Dot => HeadSpec::Dot,
            HeadSpec::Mlp { hidden, activation, .. } => HeadSpec::Mlp {
                input_dim: 2 * k,
                hidden: hidden.clone(),
                activation: *activation,
            },
        };
        let model = TwoBranchModel::build(&self.dataset, &inst, &targ, &head, self.loss.output(), self.seed)?;
        let mut tc = TrainConfig::new(
            lr,
            positive_int(config, "batch_size", d.batch_size)?,
            self.loss,
            self.seed,
        );
        tc.patience = d.patience;
        Ok((model, tc))
    }

    /// Trains `config` up to `budget` epochs. The returned model holds the
    /// best validation epoch's weights.
    pub fn fit(
        &self,
        config: &Configuration,
        budget: u32,
        resume_from: Option<&Checkpoint>,
    ) -> Result<(TwoBranchModel, TrainOutcome), NetError> {
        let (mut model, tc) = self.build(config)?;
        let out = train(
            &mut model,
            &self.dataset,
            &self.folds.train,
            &self.folds.validation,
            &tc,
            budget,
            resume_from,
        )?;
        model.params_mut().copy_from_slice(&out.checkpoint.best_params);
        Ok((model, out))
    }

    /// Headline metric on the test fold; empty when there is no test fold
    /// or the metric is undefined there.
    pub fn test_metrics(&self, model: &TwoBranchModel) -> Result<BTreeMap<String, f64>, NetError> {
        let mut out = BTreeMap::new();
        if self.folds.test.is_empty() {
            return Ok(out);
        }
        let cells = self.score_cells(model)?;
        if let Ok(v) = self.metric.evaluate(&cells, &self.train_means) {
            out.insert(self.metric.to_string(), v);
        }
        Ok(out)
    }

    pub fn score_cells(&self, model: &TwoBranchModel) -> Result<Vec<ScoredCell>, NetError> {
        let pairs: Vec<(usize, usize)> = self.folds.test.iter().map(|t| (t.instance, t.target)).collect();
        let preds = predict_pairs(model, &self.dataset, &pairs, &self.folds.train)?;
        Ok(self
            .folds
            .test
            .iter()
            .zip(preds)
            .map(|(t, prediction)| ScoredCell {
                instance: t.instance,
                target: t.target,
                truth: t.score,
                prediction,
            })
            .collect())
    }

    pub fn is_one_hot(&self, side: Side) -> bool {
        match side {
            Side::Instance => self.dataset.instance_features.is_none(),
            Side::Target => self.dataset.target_features.is_none(),
        }
    }
}

impl Objective for MtpObjective {
    type Checkpoint = Checkpoint;

    fn evaluate(
        &self,
        config: &Configuration,
        budget: u32,
        resume_from: Option<&Checkpoint>,
    ) -> Result<Evaluation<Checkpoint>, crate::hpo::ObjectiveError> {
        let (model, out) = self.fit(config, budget, resume_from)?;
        Ok(Evaluation {
            val_loss: out.val_loss(),
            metrics: self.test_metrics(&model)?,
            checkpoint: Some(out.checkpoint),
        })
    }
}
