use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mtptune_core::hpo::TrialLedger;
use mtptune_core::metrics::{
    rank_over_time, DatasetTrajectories, Direction, IncumbentTrajectory, MetricSpec, RankingTable,
};

use crate::args::ReportArgs;
use crate::svg::{LineChart, Series};
use crate::tune::{RunMeta, LEDGER_FILE, RUN_FILE};

pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const RANKING_FILE: &str = "ranking.csv";
pub const END_POINTS_FILE: &str = "end_points.csv";
pub const RANKING_PLOT: &str = "ranking.svg";

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub meta: RunMeta,
    pub ledger: TrialLedger,
}

#[derive(Debug, Clone)]
pub struct Report {
    /// dataset -> method -> trajectory averaged over repeats.
    pub trajectories: BTreeMap<String, BTreeMap<String, IncumbentTrajectory>>,
    pub metrics: BTreeMap<String, MetricSpec>,
    pub ranking: Option<RankingTable>,
    pub files: Vec<PathBuf>,
}

fn find_ledgers(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_ledgers(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == LEDGER_FILE) {
            found.push(p);
        }
    }
    Ok(())
}

/// Every run directory below `dir`, in path order.
pub fn collect_runs(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut ledgers = Vec::new();
    find_ledgers(dir, &mut ledgers)?;
    let mut runs = Vec::new();
    for path in ledgers {
        let run_dir = path.parent().expect("file has a parent").to_path_buf();
        let meta_path = run_dir.join(RUN_FILE);
        let meta: RunMeta = serde_json::from_reader(BufReader::new(
            File::open(&meta_path).with_context(|| format!("opening {}", meta_path.display()))?,
        ))
        .with_context(|| format!("parsing {}", meta_path.display()))?;
        let ledger = TrialLedger::read_jsonl(BufReader::new(File::open(&path)?))
            .with_context(|| format!("reading {}", path.display()))?;
        runs.push(RunRecord {
            dir: run_dir,
            meta,
            ledger,
        });
    }
    Ok(runs)
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Aggregates the runs below `results` and writes CSV and SVG summaries into `out`.
pub fn write_report(results: &Path, out: &Path, resolution: usize, log: &mut dyn Write) -> Result<Report> {
    let runs = collect_runs(results)?;
    if runs.is_empty() {
        bail!("no {LEDGER_FILE} found below {}", results.display());
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut grouped: BTreeMap<String, BTreeMap<String, Vec<IncumbentTrajectory>>> = BTreeMap::new();
    let mut metrics: BTreeMap<String, MetricSpec> = BTreeMap::new();
    for run in &runs {
        let metric: MetricSpec = run
            .ledger
            .header
            .metric
            .parse()
            .with_context(|| format!("metric in {}", run.dir.display()))?;
        match metrics.get(&run.meta.dataset) {
            Some(m) if *m != metric => bail!(
                "dataset {} mixes metrics {m} and {metric} ({})",
                run.meta.dataset,
                run.dir.display()
            ),
            _ => {
                metrics.insert(run.meta.dataset.clone(), metric);
            }
        }
        let traj = run.ledger.trajectory(&run.ledger.header.metric);
        if traj.points.is_empty() {
            writeln!(log, "skipping {}: no completed trial", run.dir.display())?;
            continue;
        }
        grouped
            .entry(run.meta.dataset.clone())
            .or_default()
            .entry(run.meta.method.name().to_string())
            .or_default()
            .push(traj);
    }

    let mut trajectories: BTreeMap<String, BTreeMap<String, IncumbentTrajectory>> = BTreeMap::new();
    for (dataset, methods) in grouped {
        let mut avg = BTreeMap::new();
        for (method, runs) in methods {
            avg.insert(method, IncumbentTrajectory::average(&runs)?);
        }
        trajectories.insert(dataset, avg);
    }

    let mut files = Vec::new();
    let path = out.join(TRAJECTORIES_FILE);
    let mut w = create(&path)?;
    writeln!(w, "dataset,method,time,val_loss,test_metric")?;
    for (dataset, methods) in &trajectories {
        for (method, t) in methods {
            for p in &t.points {
                writeln!(w, "{dataset},{method},{},{},{}", p.time, p.val_loss, p.test_metric)?;
            }
        }
    }
    w.flush()?;
    files.push(path);

    for (dataset, methods) in &trajectories {
        let metric = metrics[dataset];
        let chart = LineChart {
            title: format!("{dataset}: incumbent test {metric}"),
            x_label: "epochs consumed".into(),
            y_label: format!("test {metric}"),
            series: methods
                .iter()
                .map(|(m, t)| Series {
                    label: m.clone(),
                    points: t.points.iter().map(|p| (p.time, p.test_metric)).collect(),
                })
                .collect(),
            steps: true,
            markers: Vec::new(),
        };
        let path = out.join(format!("incumbent_{}.svg", file_safe(dataset)));
        fs::write(&path, chart.render())?;
        files.push(path);
    }

    let ranking = ranking_table(&trajectories, &metrics, resolution, log)?;
    if let Some(table) = &ranking {
        let path = out.join(RANKING_FILE);
        let mut w = create(&path)?;
        table.write_csv(&mut w)?;
        w.flush()?;
        files.push(path);
        let path = out.join(END_POINTS_FILE);
        let mut w = create(&path)?;
        table.write_end_points_csv(&mut w)?;
        w.flush()?;
        files.push(path);
        let chart = LineChart {
            title: format!("average rank over {} dataset(s)", trajectories.len()),
            x_label: "% of runtime".into(),
            y_label: "average rank (lower is better)".into(),
            series: table
                .methods
                .iter()
                .enumerate()
                .map(|(k, m)| Series {
                    label: m.clone(),
                    points: table
                        .grid
                        .iter()
                        .zip(&table.ranks)
                        .map(|(t, r)| (100.0 * t, r[k]))
                        .collect(),
                })
                .collect(),
            steps: false,
            markers: table
                .end_points
                .iter()
                .enumerate()
                .map(|(k, e)| (k, 100.0 * e))
                .collect(),
        };
        let path = out.join(RANKING_PLOT);
        fs::write(&path, chart.render())?;
        files.push(path);
    }
    for f in &files {
        writeln!(log, "wrote {}", f.display())?;
    }
    Ok(Report {
        trajectories,
        metrics,
        ranking,
        files,
    })
}

fn ranking_table(
    trajectories: &BTreeMap<String, BTreeMap<String, IncumbentTrajectory>>,
    metrics: &BTreeMap<String, MetricSpec>,
    resolution: usize,
    log: &mut dyn Write,
) -> Result<Option<RankingTable>> {
    let methods: Vec<&String> = match trajectories.values().next() {
        Some(m) => m.keys().collect(),
        None => return Ok(None),
    };
    if methods.len() < 2 {
        return Ok(None);
    }
    if trajectories.values().any(|m| m.keys().collect::<Vec<_>>() != methods) {
        writeln!(log, "datasets cover different methods; ranking skipped")?;
        return Ok(None);
    }
    let input: BTreeMap<String, DatasetTrajectories> = trajectories
        .iter()
        .map(|(d, m)| {
            let direction: Direction = metrics[d].direction();
            (
                d.clone(),
                DatasetTrajectories {
                    direction,
                    methods: m.clone(),
                },
            )
        })
        .collect();
    Ok(Some(rank_over_time(&input, resolution)?))
}

pub fn cmd_report(args: &ReportArgs, log: &mut dyn Write) -> Result<Report> {
    let out = args.out.clone().unwrap_or_else(|| args.results.clone());
    write_report(&args.results, &out, args.resolution, log)
}
