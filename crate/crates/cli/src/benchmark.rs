use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};

use crate::args::{BenchmarkArgs, DataArgs};
use crate::report::{write_report, Report};
use crate::tune::{dataset_name, prepare, run_method, TuneSummary};

/// Data arguments for a directory in the `save_bundle` layout.
pub fn dataset_dir(dir: &Path) -> Result<DataArgs> {
    let scores = dir.join("scores.csv");
    if !scores.is_file() {
        bail!("--dataset {}: no scores.csv inside", dir.display());
    }
    let opt = |name: &str| -> Option<PathBuf> {
        let p = dir.join(name);
        p.is_file().then_some(p)
    };
    Ok(DataArgs {
        scores,
        instance_features: opt("instance_features.csv"),
        target_features: opt("target_features.csv"),
        test: opt("test.csv"),
    })
}

/// Run directory of one benchmark cell.
pub fn cell_dir(out: &Path, dataset: &str, method: &str, repeat: u32) -> PathBuf {
    out.join(dataset).join(method).join(format!("rep{repeat}"))
}

pub struct BenchmarkSummary {
    pub runs: Vec<TuneSummary>,
    pub report: Report,
}

pub fn cmd_benchmark(args: &BenchmarkArgs, log: &mut dyn Write) -> Result<BenchmarkSummary> {
    let mut seen = BTreeSet::new();
    let mut datasets = Vec::new();
    for dir in &args.datasets {
        let data = dataset_dir(dir)?;
        let name = dataset_name(&data.scores);
        if !seen.insert(name.clone()) {
            bail!("--dataset {}: name {name} used twice", dir.display());
        }
        datasets.push((name, data));
    }
    let mut listed = BTreeSet::new();
    let methods: Vec<_> = args
        .methods
        .iter()
        .copied()
        .filter(|m| listed.insert(m.name()))
        .collect();
    let mut runs = Vec::new();
    for (name, data) in &datasets {
        for r in 0..args.repeats {
            let seed = args.options.seed + u64::from(r);
            let prepared = prepare(name, data, &args.options, seed, log)?;
            for &method in &methods {
                let out = cell_dir(&args.out, name, method.name(), r);
                runs.push(run_method(&prepared, method, &args.options, &out, log)?);
            }
        }
    }
    let report = write_report(&args.out, &args.out, args.resolution, log)?;
    Ok(BenchmarkSummary { runs, report })
}
