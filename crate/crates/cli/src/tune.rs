use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mtptune_core::data::{calibrate_max_budget, load_bundle, DatasetBundle};
use mtptune_core::hpo::{hyperband_cycle_cost, run, Method, RunOptions, TrialLedger, TunerSpec};
use mtptune_core::metrics::{MetricSpec, TRAJECTORY_CSV_HEADER};
use mtptune_core::mtp::{
    auto_answer, split, split_train_validation, AutoAnswerOptions, MtpSetting, ScoreType, ValidationSetting,
};
use mtptune_core::objective::{default_space, MtpObjective};
use mtptune_core::space::{ConfigSpace, Configuration};
use serde::{Deserialize, Serialize};

use crate::args::{DataArgs, TuneArgs, TuneOptions};
use crate::infer::InferReport;

pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const RUN_FILE: &str = "run.json";
pub const SPACE_FILE: &str = "space.yaml";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const INCUMBENT_FILE: &str = "incumbent.json";
pub const CHECKPOINT_FILE: &str = "incumbent.ckpt";

/// A dataset split and wrapped as a tuning objective, shared by every
/// method run on it with the same seed.
pub struct Prepared {
    pub name: String,
    pub report: InferReport,
    pub setting: ValidationSetting,
    pub metric: MetricSpec,
    pub objective: MtpObjective,
    pub space: ConfigSpace,
    pub max_budget: u32,
    pub calibrated: bool,
    pub total_budget: u64,
    pub seed: u64,
    pub data: DataArgs,
}

/// Self-description written first into every run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub dataset: String,
    pub scores: String,
    pub instance_features: Option<String>,
    pub target_features: Option<String>,
    pub test: Option<String>,
    pub method: Method,
    pub seed: u64,
    pub eta: u32,
    pub max_budget: u32,
    pub max_budget_calibrated: bool,
    pub total_budget: u64,
    pub parallelism: u32,
    pub metric: String,
    pub settings: Vec<MtpSetting>,
    pub validation_setting: ValidationSetting,
    pub answers: String,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncumbentReport {
    pub trial: u64,
    pub config: Configuration,
    pub budget: u32,
    pub val_loss: f64,
    /// Test metrics of the incumbent retrained from scratch to its budget.
    pub test_metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct TuneSummary {
    pub out: PathBuf,
    pub method: Method,
    pub max_budget: u32,
    pub total_budget: u64,
    pub metric: MetricSpec,
    pub ledger: TrialLedger,
    pub incumbent: Option<IncumbentReport>,
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn load(data: &DataArgs) -> Result<DatasetBundle> {
    let bundle = load_bundle(
        &data.scores,
        data.instance_features.as_deref(),
        data.target_features.as_deref(),
        data.test.as_deref(),
    )?;
    Ok(bundle)
}

fn pick_metric(report: &InferReport, score_type: ScoreType, given: Option<MetricSpec>) -> Result<MetricSpec> {
    let metric = match (given, report.primary_setting()) {
        (Some(m), _) => m,
        (None, Some(s)) => MetricSpec::for_setting(s),
        (None, None) if score_type == ScoreType::Binary => MetricSpec::MACRO_AUPR,
        (None, None) => MetricSpec::MICRO_RMSE,
    };
    if metric.is_classification() && score_type != ScoreType::Binary {
        bail!("--metric {metric} needs binary scores; pass a regression metric such as micro_rmse");
    }
    Ok(metric)
}

/// Loads, routes and splits a dataset, builds the objective, and settles the
/// maximum and total budgets.
pub fn prepare(name: &str, data: &DataArgs, opts: &TuneOptions, seed: u64, log: &mut dyn Write) -> Result<Prepared> {
    let bundle = load(data)?;
    let train = &bundle.train;
    let auto = AutoAnswerOptions {
        hierarchy: opts.hierarchy,
        ..AutoAnswerOptions::default()
    };
    let answers = auto_answer(train, bundle.test.as_ref(), &auto)
        .with_context(|| format!("answering the questionnaire for {}", path_string(&data.scores)))?;
    let report = InferReport::new(answers);
    let setting = opts.setting.unwrap_or(report.validation);
    let metric = pick_metric(&report, train.score_type, opts.metric)?;

    let folds = match &bundle.test {
        Some(test) => {
            let plan = split_train_validation(train, setting, opts.val_fraction, seed).context("--val-fraction")?;
            let mut folds = plan.folds(train);
            folds.test = test.triplets.clone();
            folds
        }
        None => split(train, setting, opts.test_fraction, opts.val_fraction, seed)
            .with_context(|| format!("splitting {} for Setting {setting}", path_string(&data.scores)))?
            .folds(train),
    };
    let objective = MtpObjective::new(train.clone(), folds, metric, seed).with_context(|| {
        format!(
            "Setting {setting} is infeasible for {}: provide side information for the novel side",
            path_string(&data.scores)
        )
    })?;
    let space = match &opts.space {
        Some(p) => ConfigSpace::from_file(p).with_context(|| format!("--space {}", path_string(p)))?,
        None => default_space(train)?,
    };

    let (max_budget, calibrated) = match opts.max_budget {
        Some(r) if r >= 1 => (r, false),
        Some(_) => bail!("--max-budget must be at least 1"),
        None => {
            let r = calibrate_max_budget(&objective, &space, opts.probes, opts.epoch_cap, opts.eta, seed)
                .context("calibrating --max-budget")?;
            writeln!(log, "calibrated max budget: {r} epochs from {} probes", opts.probes)?;
            (r, true)
        }
    };
    let total_budget = match opts.total_budget {
        Some(b) => b,
        None => hyperband_cycle_cost(max_budget, opts.eta).context("--eta")?,
    };
    Ok(Prepared {
        name: name.to_string(),
        report,
        setting,
        metric,
        objective,
        space,
        max_budget,
        calibrated,
        total_budget,
        seed,
        data: data.clone(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path_string(path)))?;
    Ok(BufWriter::new(f))
}

/// Runs one tuner on a prepared dataset and writes its run directory.
pub fn run_method(
    p: &Prepared,
    method: Method,
    opts: &TuneOptions,
    out: &Path,
    log: &mut dyn Write,
) -> Result<TuneSummary> {
    fs::create_dir_all(out).with_context(|| format!("creating --out {}", path_string(out)))?;
    let folds = p.objective.folds();
    let meta = RunMeta {
        dataset: p.name.clone(),
        scores: path_string(&p.data.scores),
        instance_features: p.data.instance_features.as_deref().map(path_string),
        target_features: p.data.target_features.as_deref().map(path_string),
        test: p.data.test.as_deref().map(path_string),
        method,
        seed: p.seed,
        eta: opts.eta,
        max_budget: p.max_budget,
        max_budget_calibrated: p.calibrated,
        total_budget: p.total_budget,
        parallelism: opts.parallel,
        metric: p.metric.to_string(),
        settings: p.report.settings.clone(),
        validation_setting: p.setting,
        answers: p.report.answers.to_string(),
        n_train: folds.train.len(),
        n_validation: folds.validation.len(),
        n_test: folds.test.len(),
    };
    let mut w = create(&out.join(RUN_FILE))?;
    serde_json::to_writer_pretty(&mut w, &meta)?;
    writeln!(w)?;
    w.flush()?;
    fs::write(out.join(SPACE_FILE), p.space.to_yaml_string())?;

    let mut spec = TunerSpec::new(method, p.max_budget, p.total_budget, p.seed);
    spec.eta = opts.eta;
    spec.parallelism = opts.parallel as usize;
    let mut options = RunOptions::new(p.metric.to_string());
    options.record_wall_clock = opts.wall_clock;

    let ledger_path = out.join(LEDGER_FILE);
    let mut sink = create(&ledger_path)?;
    let output = run(&spec, &p.space, &p.objective, &options, Some(&mut sink))
        .with_context(|| format!("tuning with --method {method}"))?;
    sink.flush()?;

    let mut traj = create(&out.join(TRAJECTORY_FILE))?;
    writeln!(traj, "{TRAJECTORY_CSV_HEADER}")?;
    output.trajectory.write_csv(method.name(), &mut traj)?;
    traj.flush()?;

    let incumbent = match output.ledger.incumbent() {
        Some(best) => {
            let (model, outcome) = p
                .objective
                .fit(&best.config, best.budget, None)
                .context("retraining the incumbent")?;
            outcome.checkpoint.save(&out.join(CHECKPOINT_FILE))?;
            let report = IncumbentReport {
                trial: best.id,
                config: best.config.clone(),
                budget: best.budget,
                val_loss: best.val_loss.unwrap_or(f64::NAN),
                test_metrics: p.objective.test_metrics(&model)?,
            };
            let mut w = create(&out.join(INCUMBENT_FILE))?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
            Some(report)
        }
        None => None,
    };

    writeln!(
        log,
        "{} {method}: {} trials, {} epochs",
        p.name,
        output.ledger.trials.len(),
        output.ledger.epochs_consumed()
    )?;
    if let Some(inc) = &incumbent {
        let metric = p.metric.to_string();
        let test = inc.test_metrics.get(&metric).copied().unwrap_or(f64::NAN);
        writeln!(
            log,
            "  incumbent trial {} at {} epochs: val_loss {:.6}, test {metric} {test:.6}",
            inc.trial, inc.budget, inc.val_loss
        )?;
        writeln!(log, "  config {}", inc.config)?;
    } else {
        writeln!(log, "  no trial completed")?;
    }
    Ok(TuneSummary {
        out: out.to_path_buf(),
        method,
        max_budget: p.max_budget,
        total_budget: p.total_budget,
        metric: p.metric,
        ledger: output.ledger,
        incumbent,
    })
}

/// File stem of the score file, or its directory's name for the
/// `<dir>/scores.csv` layout.
pub fn dataset_name(scores: &Path) -> String {
    let stem = scores.file_stem().map(|s| s.to_string_lossy().into_owned());
    match stem.as_deref() {
        Some("scores") | None => scores
            .parent()
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string()),
        Some(s) => s.to_string(),
    }
}

pub fn cmd_tune(args: &TuneArgs, log: &mut dyn Write) -> Result<TuneSummary> {
    let name = dataset_name(&args.data.scores);
    let p = prepare(&name, &args.data, &args.options, args.options.seed, log)?;
    writeln!(log, "{}", p.report.summary_line())?;
    writeln!(
        log,
        "split: Setting {}, metric {}, max budget {}, total budget {}",
        p.setting, p.metric, p.max_budget, p.total_budget
    )?;
    run_method(&p, args.method, &args.options, &args.out, log)
}
