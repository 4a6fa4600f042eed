use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::space::{ConfigSpace, Configuration};
use crate::surrogate::{EiCandidatePool, KdePair, Observation, RandomForest, DEFAULT_GAMMA, DEFAULT_KDE_CANDIDATES};

use super::ledger::{Trial, TrialStatus};
use super::schedule::{hyperband_brackets, promote, sh_schedule, BracketSpec};
use super::{HpoError, Method, TrialId};

const STREAM_CONFIGS: u64 = 1;
const STREAM_MODEL: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerSpec {
    pub method: Method,
    pub eta: u32,
    /// Maximum epochs of a single configuration (R).
    pub max_budget: u32,
    /// Epoch-equivalents available to the run; doubled for `random_2x`.
    pub total_budget: u64,
    pub seed: u64,
    pub parallelism: usize,
    /// BOHB: probability of sampling uniformly instead of from the model.
    pub rho: f64,
    pub gamma: f64,
    /// BOHB: observations needed at a budget level; defaults to dim + 2.
    pub min_points: Option<usize>,
    /// SMAC: random trials before the forest is used.
    pub n_init: usize,
    pub n_trees: usize,
    pub min_leaf: usize,
}

impl TunerSpec {
    pub fn new(method: Method, max_budget: u32, total_budget: u64, seed: u64) -> Self {
        Self {
            method,
            eta: 3,
            max_budget,
            total_budget,
            seed,
            parallelism: 1,
            rho: 1.0 / 3.0,
            gamma: DEFAULT_GAMMA,
            min_points: None,
            n_init: 5,
            n_trees: 10,
            min_leaf: 1,
        }
    }

    pub fn validate(&self) -> Result<(), HpoError> {
        if self.eta < 2 {
            return Err(HpoError::InvalidEta(self.eta));
        }
        let bad = |m: &str| Err(HpoError::InvalidSpec(m.to_string()));
        if self.max_budget == 0 {
            return bad("max budget must be at least 1");
        }
        if self.total_budget == 0 {
            return bad("total budget must be at least 1");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn effective_budget(&self) -> u64 {
        match self.method {
            Method::Random2x => self.total_budget.saturating_mul(2),
            _ => self.total_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRequest {
    pub id: TrialId,
    pub config: Configuration,
    /// Total epochs after this evaluation.
    pub budget: u32,
    pub resume_from: Option<TrialId>,
    /// Epochs to train in this evaluation.
    pub epochs: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Evaluate(TrialRequest),
    /// Nothing can be issued until an outstanding trial is told.
    Wait,
    Done,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Completed {
        val_loss: f64,
        test_metrics: BTreeMap<String, f64>,
    },
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone)]
struct BracketRun {
    spec: BracketSpec,
    rungs: Vec<(u64, u32)>,
    rung: usize,
    /// Configurations still to be issued in the current rung, with the trial
    /// they continue from.
    queue: VecDeque<(Configuration, Option<TrialId>)>,
    issued: Vec<TrialId>,
}

/// Largest budget level holding at least `min_points` observations.
pub fn bohb_fit_level(counts: &BTreeMap<u32, usize>, min_points: usize) -> Option<u32> {
    counts.iter().rev().find(|(_, &n)| n >= min_points).map(|(&b, _)| b)
}

/// Tuning state machine. Callers alternate [`Scheduler::ask`] and
/// [`Scheduler::tell`]; trial ids are issued consecutively from 0.
#[derive(Debug, Clone)]
pub struct Scheduler {
    spec: TunerSpec,
    space: ConfigSpace,
    config_rng: ChaCha8Rng,
    model_rng: ChaCha8Rng,
    trials: Vec<Trial>,
    outstanding: usize,
    committed: u64,
    exhausted: bool,
    brackets: Vec<BracketSpec>,
    next_bracket: usize,
    current: Option<BracketRun>,
    pool: EiCandidatePool,
}

impl Scheduler {
    pub fn new(spec: TunerSpec, space: ConfigSpace) -> Result<Self, HpoError> {
        spec.validate()?;
        let brackets = if spec.method.is_multi_fidelity() {
            hyperband_brackets(spec.max_budget, spec.eta)?
        } else {
            Vec::new()
        };
        let rng = |stream| {
            let mut r = ChaCha8Rng::seed_from_u64(spec.seed);
            r.set_stream(stream);
            r
        };
        Ok(Self {
            config_rng: rng(STREAM_CONFIGS),
            model_rng: rng(STREAM_MODEL),
            spec,
            space,
            trials: Vec::new(),
            outstanding: 0,
            committed: 0,
            exhausted: false,
            brackets,
            next_bracket: 0,
            current: None,
            pool: EiCandidatePool::default(),
        })
    }

    /// Rebuilds the scheduler from previously recorded trials. Requests the
    /// record cannot answer (unfinished or missing trials) are returned for
    /// re-evaluation and remain outstanding.
    pub fn replay(
        spec: TunerSpec,
        space: ConfigSpace,
        recorded: &[Trial],
    ) -> Result<(Self, Vec<TrialRequest>), HpoError> {
        let mut s = Self::new(spec, space)?;
        let by_id: BTreeMap<TrialId, &Trial> = recorded.iter().map(|t| (t.id, t)).collect();
        let mut used = 0usize;
        let mut pending = Vec::new();
        while let Action::Evaluate(req) = s.ask() {
            match by_id.get(&req.id) {
                Some(t) if t.is_finished() => {
                    if t.config != req.config || t.budget != req.budget || t.parent_checkpoint != req.resume_from {
                        return Err(HpoError::ReplayMismatch(format!(
                            "trial {} was recorded with a different request",
                            t.id
                        )));
                    }
                    let outcome = match (t.status, t.val_loss) {
                        (TrialStatus::Completed, Some(v)) => TrialOutcome::Completed {
                            val_loss: v,
                            test_metrics: t.test_metrics.clone(),
                        },
                        _ => TrialOutcome::Failed {
                            reason: t.error.clone().unwrap_or_default(),
                        },
                    };
                    s.tell_timed(req.id, outcome, t.wall_clock_s)?;
                    used += 1;
                }
                Some(_) => {
                    used += 1;
                    pending.push(req);
                }
                None => pending.push(req),
            }
        }
        if used != recorded.len() {
            return Err(HpoError::ReplayMismatch(format!(
                "{} recorded trials were never requested",
                recorded.len() - used
            )));
        }
        Ok((s, pending))
    }

    pub fn spec(&self) -> &TunerSpec {
        &self.spec
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn trial(&self, id: TrialId) -> Option<&Trial> {
        self.trials.get(id as usize)
    }

    pub fn outstanding(&self) -> usize {
        self.outstanding
    }

    /// Epochs committed to issued trials.
    pub fn committed(&self) -> u64 {
        self.committed
    }

    /// Best completed trial, earliest on ties.
    pub fn incumbent(&self) -> Option<&Trial> {
        self.trials
            .iter()
            .filter(|t| t.status == TrialStatus::Completed)
            .min_by(|a, b| {
                let x = a.val_loss.unwrap_or(f64::INFINITY);
                let y = b.val_loss.unwrap_or(f64::INFINITY);
                x.total_cmp(&y).then(a.id.cmp(&b.id))
            })
    }

    /// Trials whose checkpoints may still be resumed.
    pub fn live_checkpoints(&self) -> BTreeSet<TrialId> {
        let mut live = BTreeSet::new();
        if let Some(run) = &self.current {
            live.extend(run.queue.iter().filter_map(|(_, p)| *p));
            if run.rung + 1 < run.rungs.len() {
                live.extend(run.issued.iter().copied());
            }
        }
        live
    }

    fn idle(&self) -> Action {
        if self.outstanding > 0 {
            Action::Wait
        } else {
            Action::Done
        }
    }

    fn fits(&mut self, epochs: u32) -> bool {
        if self.committed + u64::from(epochs) > self.spec.effective_budget() {
            self.exhausted = true;
        }
        !self.exhausted
    }

    fn issue(
        &mut self,
        config: Configuration,
        budget: u32,
        resume_from: Option<TrialId>,
        bracket: Option<(u32, usize)>,
    ) -> TrialRequest {
        let parent_budget = resume_from.map_or(0, |p| self.trials[p as usize].budget);
        let epochs = budget - parent_budget;
        let id = self.trials.len() as TrialId;
        self.committed += u64::from(epochs);
        self.outstanding += 1;
        self.trials.push(Trial {
            id,
            config: config.clone(),
            budget,
            status: TrialStatus::Running,
            val_loss: None,
            test_metrics: BTreeMap::new(),
            wall_clock_s: None,
            parent_checkpoint: resume_from,
            epochs,
            bracket: bracket.map(|b| b.0),
            rung: bracket.map(|b| b.1),
            error: None,
        });
        TrialRequest {
            id,
            config,
            budget,
            resume_from,
            epochs,
        }
    }

    pub fn ask(&mut self) -> Action {
        if self.outstanding >= self.spec.parallelism {
            return Action::Wait;
        }
        if self.exhausted {
            return self.idle();
        }
        match self.spec.method {
            Method::Random | Method::Random2x | Method::Smac => {
                let r = self.spec.max_budget;
                if !self.fits(r) {
                    return self.idle();
                }
                let config = if self.spec.method == Method::Smac {
                    self.smac_next()
                } else {
                    self.space.sample(&mut self.config_rng)
                };
                Action::Evaluate(self.issue(config, r, None, None))
            }
            Method::Hyperband | Method::Bohb => self.ask_bracket(),
        }
    }

    fn ask_bracket(&mut self) -> Action {
        loop {
            if self.exhausted {
                return self.idle();
            }
            if self.current.is_none() {
                self.start_bracket();
            }
            let run = self.current.as_ref().expect("bracket started");
            let r_k = run.rungs[run.rung].1;
            let tag = (run.spec.s, run.rung);
            if let Some((_, parent)) = run.queue.front() {
                let parent_budget = parent.map_or(0, |p| self.trials[p as usize].budget);
                if !self.fits(r_k - parent_budget) {
                    continue;
                }
                let run = self.current.as_mut().expect("bracket started");
                let (config, parent) = run.queue.pop_front().expect("non-empty");
                let req = self.issue(config, r_k, parent, Some(tag));
                self.current.as_mut().expect("bracket started").issued.push(req.id);
                return Action::Evaluate(req);
            }
            if run.issued.iter().any(|&id| !self.trials[id as usize].is_finished()) {
                return Action::Wait;
            }
            if !self.advance_rung() {
                self.current = None;
            }
        }
    }

    /// Promotes the finished rung. Returns false when the bracket is over.
    fn advance_rung(&mut self) -> bool {
        let run = self.current.as_ref().expect("bracket running");
        if run.rung + 1 >= run.rungs.len() {
            return false;
        }
        let results: Vec<(TrialId, Option<f64>)> = run
            .issued
            .iter()
            .map(|&id| {
                let t = &self.trials[id as usize];
                (id, t.val_loss.filter(|_| t.status == TrialStatus::Completed))
            })
            .collect();
        let next_n = run.rungs[run.rung + 1].0 as usize;
        let mut survivors = promote(&results, self.spec.eta).expect("eta validated");
        survivors.truncate(next_n);
        let queue: VecDeque<_> = survivors
            .into_iter()
            .filter(|&id| self.trials[id as usize].status == TrialStatus::Completed)
            .map(|id| (self.trials[id as usize].config.clone(), Some(id)))
            .collect();
        if queue.is_empty() {
            return false;
        }
        let run = self.current.as_mut().expect("bracket running");
        run.rung += 1;
        run.issued.clear();
        run.queue = queue;
        true
    }

    fn start_bracket(&mut self) {
        let spec = self.brackets[self.next_bracket % self.brackets.len()];
        self.next_bracket += 1;
        let rungs =
            sh_schedule(spec.n, spec.r, self.spec.eta, self.spec.max_budget).expect("bracket parameters are valid");
        let model = match self.spec.method {
            Method::Bohb => self.fit_kde(),
            _ => None,
        };
        let mut queue = VecDeque::with_capacity(spec.n as usize);
        for _ in 0..spec.n {
            let config = match &model {
                Some(kde) => self.bohb_sample(kde),
                None => {
                    if self.spec.method == Method::Bohb {
                        // keep the coin stream aligned with the model-free case
                        let _: f64 = self.model_rng.random();
                    }
                    self.space.sample(&mut self.config_rng)
                }
            };
            queue.push_back((config, None));
        }
        self.current = Some(BracketRun {
            spec,
            rungs,
            rung: 0,
            queue,
            issued: Vec::new(),
        });
    }

    fn completed_observations(&self, budget: Option<u32>) -> Vec<Observation> {
        self.trials
            .iter()
            .filter(|t| t.status == TrialStatus::Completed)
            .filter(|t| budget.is_none_or(|b| t.budget == b))
            .filter_map(|t| {
                let x = self.space.encode(&t.config).ok()?;
                Some(Observation::new(x, t.budget, t.val_loss?))
            })
            .collect()
    }

    fn fit_kde(&self) -> Option<KdePair> {
        let obs = self.completed_observations(None);
        let mut counts = BTreeMap::new();
        for o in &obs {
            *counts.entry(o.budget).or_insert(0usize) += 1;
        }
        let min_points = self.spec.min_points.unwrap_or(self.space.encoded_dim() + 2);
        let level = bohb_fit_level(&counts, min_points)?;
        let at_level: Vec<Observation> = obs.into_iter().filter(|o| o.budget == level).collect();
        KdePair::fit(&at_level, &self.space.layout(), self.spec.gamma, self.spec.min_points).ok()
    }

    fn bohb_sample(&mut self, kde: &KdePair) -> Configuration {
        let coin: f64 = self.model_rng.random();
        if coin < self.spec.rho {
            return self.space.sample(&mut self.config_rng);
        }
        let x = kde.propose(DEFAULT_KDE_CANDIDATES, &mut self.model_rng);
        self.space.decode(&x).expect("model samples have the space dimension")
    }

    fn smac_next(&mut self) -> Configuration {
        let full = self.completed_observations(Some(self.spec.max_budget));
        if self.trials.len() < self.spec.n_init || full.len() < 2 {
            return self.space.sample(&mut self.config_rng);
        }
        let forest = match RandomForest::fit(&full, self.spec.n_trees, self.spec.min_leaf, &mut self.model_rng) {
            Ok(f) => f,
            Err(_) => return self.space.sample(&mut self.config_rng),
        };
        let mut ranked = full;
        ranked.sort_by(|a, b| a.loss.total_cmp(&b.loss));
        let o_min = ranked[0].loss;
        let best: Vec<Vec<f64>> = ranked.into_iter().map(|o| o.x).collect();
        let (x, _) = self
            .pool
            .maximize(&forest, &self.space, &best, o_min, &mut self.model_rng);
        self.space.decode(&x).expect("candidates have the space dimension")
    }

    pub fn tell(&mut self, id: TrialId, outcome: TrialOutcome) -> Result<&Trial, HpoError> {
        self.tell_timed(id, outcome, None)
    }

    /// Records a result. A completion with a non-finite loss counts as a
    /// failure; non-finite test metrics are dropped.
    pub fn tell_timed(
        &mut self,
        id: TrialId,
        outcome: TrialOutcome,
        wall_clock_s: Option<f64>,
    ) -> Result<&Trial, HpoError> {
        let t = self
            .trials
            .get_mut(id as usize)
            .filter(|t| t.status == TrialStatus::Running)
            .ok_or(HpoError::UnknownTrial(id))?;
        t.wall_clock_s = wall_clock_s;
        match outcome {
            TrialOutcome::Completed { val_loss, test_metrics } if val_loss.is_finite() => {
                t.status = TrialStatus::Completed;
                t.val_loss = Some(val_loss);
                t.test_metrics = test_metrics.into_iter().filter(|(_, v)| v.is_finite()).collect();
            }
            TrialOutcome::Completed { val_loss, .. } => {
                t.status = TrialStatus::Failed;
                t.error = Some(format!("non-finite validation loss {val_loss}"));
            }
            TrialOutcome::Failed { reason } => {
                t.status = TrialStatus::Failed;
                t.error = Some(reason);
            }
        }
        self.outstanding -= 1;
        Ok(&self.trials[id as usize])
    }
}
