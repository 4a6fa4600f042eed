use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::metrics::{IncumbentTrajectory, TrajectoryPoint};
use crate::space::Configuration;

use super::{HpoError, Method, TrialId, TunerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Pending,
    Running,
    Completed,
    Failed,
}

/// One evaluation request and, once told, its result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: TrialId,
    pub config: Configuration,
    /// Total epochs the model has been trained for after this trial.
    pub budget: u32,
    pub status: TrialStatus,
    pub val_loss: Option<f64>,
    #[serde(default)]
    pub test_metrics: BTreeMap<String, f64>,
    pub wall_clock_s: Option<f64>,
    /// Trial whose checkpoint this one continued from.
    pub parent_checkpoint: Option<TrialId>,
    /// Epochs charged to this trial (budget minus the parent's budget).
    pub epochs: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rung: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trial {
    pub fn is_finished(&self) -> bool {
        matches!(self.status, TrialStatus::Completed | TrialStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub method: Method,
    pub seed: u64,
    pub max_budget: u32,
    pub eta: u32,
    pub total_budget: u64,
    pub parallelism: usize,
    pub rho: f64,
    /// Name of the headline test metric.
    pub metric: String,
}

impl RunHeader {
    pub fn new(spec: &TunerSpec, metric: impl Into<String>) -> Self {
        Self {
            method: spec.method,
            seed: spec.seed,
            max_budget: spec.max_budget,
            eta: spec.eta,
            total_budget: spec.total_budget,
            parallelism: spec.parallelism,
            rho: spec.rho,
            metric: metric.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Header(RunHeader),
    Trial(Trial),
}

/// Header plus trials ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialLedger {
    pub header: RunHeader,
    pub trials: Vec<Trial>,
}

impl TrialLedger {
    pub fn new(header: RunHeader) -> Self {
        Self {
            header,
            trials: Vec::new(),
        }
    }

    pub fn write_header<W: Write + ?Sized>(header: &RunHeader, out: &mut W) -> Result<(), HpoError> {
        serde_json::to_writer(&mut *out, &Record::Header(header.clone()))?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_trial<W: Write + ?Sized>(trial: &Trial, out: &mut W) -> Result<(), HpoError> {
        serde_json::to_writer(&mut *out, &Record::Trial(trial.clone()))?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_jsonl<W: Write + ?Sized>(&self, out: &mut W) -> Result<(), HpoError> {
        Self::write_header(&self.header, out)?;
        for t in &self.trials {
            Self::write_trial(t, out)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, HpoError> {
        let mut header = None;
        let mut trials: Vec<Trial> = Vec::new();
        for (no, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record =
                serde_json::from_str(&line).map_err(|e| HpoError::Ledger(format!("line {}: {e}", no + 1)))?;
            match record {
                Record::Header(h) if header.is_none() => header = Some(h),
                Record::Header(_) => return Err(HpoError::Ledger(format!("line {}: second header", no + 1))),
                Record::Trial(t) => {
                    if header.is_none() {
                        return Err(HpoError::Ledger("trial before header".into()));
                    }
                    if trials.iter().any(|o| o.id == t.id) {
                        return Err(HpoError::Ledger(format!("duplicate trial id {}", t.id)));
                    }
                    trials.push(t);
                }
            }
        }
        let header = header.ok_or_else(|| HpoError::Ledger("missing header".into()))?;
        trials.sort_by_key(|t| t.id);
        Ok(Self { header, trials })
    }

    pub fn epochs_consumed(&self) -> u64 {
        self.trials.iter().map(|t| u64::from(t.epochs)).sum()
    }

    /// Lowest completed val_loss, earliest id on ties.
    pub fn incumbent(&self) -> Option<&Trial> {
        self.trials
            .iter()
            .filter(|t| t.status == TrialStatus::Completed)
            .min_by(|a, b| {
                let (x, y) = (a.val_loss.unwrap_or(f64::INFINITY), b.val_loss.unwrap_or(f64::INFINITY));
                x.total_cmp(&y).then(a.id.cmp(&b.id))
            })
    }

    /// Incumbent over cumulative epochs, walking trials in id order. A point
    /// is added whenever val_loss improves, and once more at the end of the
    /// run. Trials lacking `metric` report NaN.
    pub fn trajectory(&self, metric: &str) -> IncumbentTrajectory {
        let mut points: Vec<TrajectoryPoint> = Vec::new();
        let mut clock = 0.0;
        let mut best = f64::INFINITY;
        let mut best_metric = f64::NAN;
        for t in &self.trials {
            clock += f64::from(t.epochs);
            if t.status != TrialStatus::Completed {
                continue;
            }
            let v = t.val_loss.unwrap_or(f64::INFINITY);
            if v < best {
                best = v;
                best_metric = t.test_metrics.get(metric).copied().unwrap_or(f64::NAN);
                let p = TrajectoryPoint {
                    time: clock,
                    val_loss: best,
                    test_metric: best_metric,
                };
                match points.last_mut() {
                    Some(last) if last.time == clock => *last = p,
                    _ => points.push(p),
                }
            }
        }
        if let Some(last) = points.last() {
            if clock > last.time {
                points.push(TrajectoryPoint {
                    time: clock,
                    val_loss: best,
                    test_metric: best_metric,
                });
            }
        }
        IncumbentTrajectory { points }
    }
}
