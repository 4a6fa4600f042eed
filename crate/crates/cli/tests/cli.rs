use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use mtptune_cli::{execute, Cli};
use tempfile::TempDir;

fn run(args: &[&str]) -> anyhow::Result<String> {
    let cli = Cli::try_parse_from(std::iter::once("mtptune").chain(args.iter().copied()))?;
    let mut out = Vec::new();
    execute(&cli, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_mc(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join("mc");
    run(&[
        "synth",
        "matrix-completion",
        "--instances",
        "30",
        "--targets",
        "20",
        "--rank",
        "2",
        "--observed",
        "0.5",
        "--seed",
        &seed.to_string(),
        "--out",
        p(&out),
    ])
    .unwrap();
    out
}

const FAST: &[&str] = &["--max-budget", "9", "--total-budget", "60", "--seed", "4"];

#[test]
fn infer_from_flags() {
    let text = run(&[
        "infer", "--q1", "yes", "--q2", "no", "--q3", "yes", "--q4", "no", "--q5", "yes", "--q6", "binary",
    ])
    .unwrap();
    assert!(text.contains("multi-label classification"), "{text}");
    assert!(text.contains("Setting B"), "{text}");
}

#[test]
fn infer_lists_both_candidates_for_shared_answers() {
    let text = run(&[
        "infer", "--q1", "yes", "--q2", "yes", "--q3", "yes", "--q4", "yes", "--q5", "no", "--q6", "any",
    ])
    .unwrap();
    assert!(text.contains("zero-shot learning"), "{text}");
    assert!(text.contains("cold-start collaborative filtering"), "{text}");
    assert!(text.contains("Setting D"), "{text}");
}

#[test]
fn infer_without_data_needs_every_answer() {
    let err = run(&["infer", "--q1", "yes"]).unwrap_err();
    assert!(format!("{err:#}").contains("--q2"), "{err:#}");
}

#[test]
fn infer_from_data() {
    let dir = TempDir::new().unwrap();
    let data = synth_mc(dir.path(), 1);
    let scores = data.join("scores.csv");
    let text = run(&["infer", "--scores", p(&scores)]).unwrap();
    assert!(text.contains("matrix completion"), "{text}");
    assert!(text.contains("Setting A"), "{text}");
}

#[test]
fn tune_writes_run_directory() {
    let dir = TempDir::new().unwrap();
    let data = synth_mc(dir.path(), 2);
    let scores = data.join("scores.csv");
    let out = dir.path().join("run");
    let mut args = vec!["tune", "--scores", p(&scores), "--method", "smac", "--out", p(&out)];
    args.extend_from_slice(FAST);
    run(&args).unwrap();
    for f in [
        "ledger.jsonl",
        "run.json",
        "space.yaml",
        "trajectory.csv",
        "incumbent.json",
        "incumbent.ckpt",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["dataset"], "mc");
    assert_eq!(meta["method"], "smac");
}

#[test]
fn benchmark_cells_match_standalone_tune_and_report_is_stable() {
    let dir = TempDir::new().unwrap();
    let data = synth_mc(dir.path(), 3);
    let scores = data.join("scores.csv");
    let bench = dir.path().join("bench");
    let mut args = vec![
        "benchmark",
        "--dataset",
        p(&data),
        "--method",
        "hyperband,random,hyperband",
        "--repeats",
        "1",
        "--out",
        p(&bench),
    ];
    args.extend_from_slice(FAST);
    run(&args).unwrap();

    let solo = dir.path().join("solo");
    let mut args = vec![
        "tune",
        "--scores",
        p(&scores),
        "--method",
        "hyperband",
        "--out",
        p(&solo),
    ];
    args.extend_from_slice(FAST);
    run(&args).unwrap();
    assert_eq!(
        fs::read(bench.join("mc/hyperband/rep0/ledger.jsonl")).unwrap(),
        fs::read(solo.join("ledger.jsonl")).unwrap()
    );

    let ranking = fs::read_to_string(bench.join("ranking.csv")).unwrap();
    assert_eq!(ranking.lines().count(), 1 + 2 * 100, "{ranking}");
    let files = [
        "trajectories.csv",
        "ranking.csv",
        "end_points.csv",
        "ranking.svg",
        "incumbent_mc.svg",
    ];
    let before: Vec<Vec<u8>> = files.iter().map(|f| fs::read(bench.join(f)).unwrap()).collect();
    let again = dir.path().join("again");
    run(&["report", p(&bench), "--out", p(&again)]).unwrap();
    for (f, b) in files.iter().zip(&before) {
        assert_eq!(&fs::read(again.join(f)).unwrap(), b, "{f} differs");
    }
}

#[test]
fn classification_metric_on_real_scores_is_rejected() {
    let dir = TempDir::new().unwrap();
    let data = synth_mc(dir.path(), 5);
    let scores = data.join("scores.csv");
    let mut args = vec![
        "tune",
        "--scores",
        p(&scores),
        "--metric",
        "macro_auroc",
        "--out",
        p(dir.path()),
    ];
    args.extend_from_slice(FAST);
    assert!(run(&args).is_err());
}

#[test]
fn benchmark_needs_scores_file() {
    let dir = TempDir::new().unwrap();
    let err = run(&[
        "benchmark",
        "--dataset",
        p(dir.path()),
        "--out",
        p(&dir.path().join("o")),
    ])
    .unwrap_err();
    assert!(format!("{err:#}").contains("scores.csv"), "{err:#}");
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = TempDir::new().unwrap();
    assert!(run(&["report", p(dir.path())]).is_err());
}

#[test]
fn bad_flag_values_are_parse_errors() {
    assert!(run(&["infer", "--q1", "maybe"]).is_err());
    assert!(run(&["tune", "--scores", "x.csv", "--parallel", "0"]).is_err());
    assert!(run(&["tune", "--scores", "x.csv", "--method", "grid"]).is_err());
}

#[test]
fn binary_reports_errors_on_stderr() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = Process::new(env!("CARGO_BIN_EXE_mtptune"))
        .args(["tune", "--scores", p(&missing), "--out", p(dir.path())])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:"), "{stderr}");
}
