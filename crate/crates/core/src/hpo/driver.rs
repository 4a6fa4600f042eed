use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::metrics::IncumbentTrajectory;
use crate::space::{ConfigSpace, Configuration};

use super::ledger::{RunHeader, TrialLedger};
use super::scheduler::{Action, Scheduler, TrialOutcome, TrialRequest, TunerSpec};
use super::{HpoError, TrialId};

pub type ObjectiveError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<C> {
    pub val_loss: f64,
    pub metrics: BTreeMap<String, f64>,
    /// State to resume from at a larger budget.
    pub checkpoint: Option<C>,
}

/// Something that can be trained to a budget, optionally continuing from an
/// earlier checkpoint.
pub trait Objective: Sync {
    type Checkpoint: Send + Sync;

    fn evaluate(
        &self,
        config: &Configuration,
        budget: u32,
        resume_from: Option<&Self::Checkpoint>,
    ) -> Result<Evaluation<Self::Checkpoint>, ObjectiveError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Headline test metric tracked in the trajectory.
    pub metric: String,
    /// Record measured seconds per trial. Off by default so that ledgers of
    /// identical runs are byte-identical.
    pub record_wall_clock: bool,
}

impl RunOptions {
    pub fn new(metric: impl Into<String>) -> Self {
        Self {
            metric: metric.into(),
            record_wall_clock: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ledger: TrialLedger,
    pub trajectory: IncumbentTrajectory,
}

struct Job<C> {
    request: TrialRequest,
    parent: Option<Arc<C>>,
}

type JobResult<C> = (TrialId, Result<Evaluation<C>, String>, Option<f64>);

fn worker<O: Objective>(
    objective: &O,
    jobs: &Mutex<mpsc::Receiver<Job<O::Checkpoint>>>,
    results: mpsc::Sender<JobResult<O::Checkpoint>>,
    timed: bool,
) {
    loop {
        let job = match jobs.lock().expect("job queue").recv() {
            Ok(j) => j,
            Err(_) => return,
        };
        let start = Instant::now();
        let req = &job.request;
        let out = catch_unwind(AssertUnwindSafe(|| {
            objective.evaluate(&req.config, req.budget, job.parent.as_deref())
        }));
        let out = match out {
            Ok(Ok(e)) => Ok(e),
            Ok(Err(e)) => Err(e.to_string()),
            Err(_) => Err("objective panicked".to_string()),
        };
        let wall = timed.then(|| start.elapsed().as_secs_f64());
        if results.send((req.id, out, wall)).is_err() {
            return;
        }
    }
}

/// Runs a tuner to completion on up to `spec.parallelism` worker threads.
///
/// When `sink` is given the ledger is streamed to it: the header first, then
/// each trial once it and every lower id have finished, so the output does
/// not depend on completion order.
pub fn run<O: Objective>(
    spec: &TunerSpec,
    space: &ConfigSpace,
    objective: &O,
    options: &RunOptions,
    mut sink: Option<&mut dyn Write>,
) -> Result<RunOutput, HpoError> {
    let mut sched = Scheduler::new(spec.clone(), space.clone())?;
    let header = RunHeader::new(spec, options.metric.clone());
    if let Some(w) = sink.as_deref_mut() {
        TrialLedger::write_header(&header, w)?;
    }
    let mut flushed = 0usize;
    let mut checkpoints: HashMap<TrialId, Arc<O::Checkpoint>> = HashMap::new();

    std::thread::scope(|scope| -> Result<(), HpoError> {
        let (job_tx, job_rx) = mpsc::channel::<Job<O::Checkpoint>>();
        let (res_tx, res_rx) = mpsc::channel::<JobResult<O::Checkpoint>>();
        let job_rx = Arc::new(Mutex::new(job_rx));
        for _ in 0..spec.parallelism {
            let jobs = Arc::clone(&job_rx);
            let results = res_tx.clone();
            let timed = options.record_wall_clock;
            scope.spawn(move || worker(objective, &jobs, results, timed));
        }
        drop(res_tx);

        loop {
            match sched.ask() {
                Action::Evaluate(request) => {
                    let parent = request.resume_from.map(|p| checkpoints.get(&p).cloned());
                    match parent {
                        Some(None) => {
                            let id = request.id;
                            let reason = format!(
                                "checkpoint of trial {} is unavailable",
                                request.resume_from.expect("resumed")
                            );
                            sched.tell(id, TrialOutcome::Failed { reason })?;
                        }
                        parent => {
                            let job = Job {
                                request,
                                parent: parent.flatten(),
                            };
                            job_tx
                                .send(job)
                                .map_err(|_| HpoError::Io(std::io::Error::other("workers exited")))?;
                        }
                    }
                }
                Action::Wait => {
                    let (id, out, wall) = res_rx
                        .recv()
                        .map_err(|_| HpoError::Io(std::io::Error::other("workers exited")))?;
                    let outcome = match out {
                        Ok(eval) => {
                            if let Some(c) = eval.checkpoint {
                                checkpoints.insert(id, Arc::new(c));
                            }
                            TrialOutcome::Completed {
                                val_loss: eval.val_loss,
                                test_metrics: eval.metrics,
                            }
                        }
                        Err(reason) => TrialOutcome::Failed { reason },
                    };
                    sched.tell_timed(id, outcome, wall)?;
                    let live = sched.live_checkpoints();
                    checkpoints.retain(|k, _| live.contains(k));
                }
                Action::Done => break,
            }
            if let Some(w) = sink.as_deref_mut() {
                let trials = sched.trials();
                while flushed < trials.len() && trials[flushed].is_finished() {
                    TrialLedger::write_trial(&trials[flushed], w)?;
                    flushed += 1;
                }
            }
        }
        drop(job_tx);
        Ok(())
    })?;

    if let Some(w) = sink {
        w.flush()?;
    }
    let ledger = TrialLedger {
        header,
        trials: sched.trials().to_vec(),
    };
    let trajectory = ledger.trajectory(&options.metric);
    Ok(RunOutput { ledger, trajectory })
}
