use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use olnl::artifacts::{self, Summary};

const SMALL: [&str; 8] = [
    "--set",
    "benchmark.train_per_class=30",
    "--set",
    "benchmark.test_per_class=10",
    "--epochs",
    "12",
    "--warmup",
    "4",
];

fn olnl(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_olnl"))
        .args(args)
        .env("OLNL_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn train(root: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    args.extend(extra);
    olnl(root, &args)
}

#[test]
fn synth_reports_the_overall_noise_rate() {
    let root = tempfile::tempdir().unwrap();
    let o = olnl(root.path(), &["synth", "--classes", "10", "--ood-fraction", "0.2", "--noise", "sym", "--rate", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("n_all = 0.6\n"), "{}", stdout(&o));

    let data = root.path().join("data").join("cifar80n-o-mini-sym0.5-s0");
    let train = olnl::dataset::read(&data.join("train.csv")).unwrap();
    assert_eq!((train.len(), train.classes), (2000, 8));
    assert!((train.noise_rate() - 0.6).abs() < 0.03);
    assert!(data.join("test.csv").is_file() && data.join("config.toml").is_file());

    let plain = root.path().join("plain");
    let o = olnl(root.path(), &["synth", "--ood-fraction", "0", "--rate", "0.3", "--out", plain.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("n_all = 0.3\n"));
    assert_eq!(olnl::dataset::read(&plain.join("train.csv")).unwrap().status_counts().open, 0);
}

#[test]
fn oracle_check_finds_no_mismatches() {
    let root = tempfile::tempdir().unwrap();
    let o = olnl(root.path(), &["oracle-check", "--n", "200"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l == "0 mismatches"), "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    let root = tempfile::tempdir().unwrap();
    for args in [&["train", "--bogus"][..], &["frobnicate"], &[], &["train", "--variant", "half"]] {
        let o = olnl(root.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr(&o).starts_with("error:") || stderr(&o).contains("Usage"), "{args:?}");
    }
    assert!(stderr(&olnl(root.path(), &["train", "--bogus"])).contains("Usage: olnl train"));
    let o = olnl(root.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("oracle-check"));
}

#[test]
fn validation_errors_exit_with_one() {
    let root = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["train", "--set", "experiment.nope=1"],
        &["train", "--rate", "1.5"],
        &["train", "--config", "/no/such/file.toml"],
        &["eval", "/no/such/checkpoint.json"],
    ];
    for args in cases {
        let o = olnl(root.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"));
    }
}

#[test]
fn numerical_abort_exits_with_two() {
    let root = tempfile::tempdir().unwrap();
    let o = train(root.path(), &root.path().join("blowup"), &["--lr", "1e308"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"));
}

#[test]
fn standard_and_full_share_their_warmup_rows() {
    let root = tempfile::tempdir().unwrap();
    let (std_dir, full_dir) = (root.path().join("standard"), root.path().join("full"));
    assert!(train(root.path(), &std_dir, &["--variant", "standard"]).status.success());
    assert!(train(root.path(), &full_dir, &["--variant", "full"]).status.success());
    let read = |d: &PathBuf| std::fs::read_to_string(d.join(artifacts::METRICS_FILE)).unwrap();
    let (a, b) = (read(&std_dir), read(&full_dir));
    let (a, b): (Vec<&str>, Vec<&str>) = (a.lines().collect(), b.lines().collect());
    assert_eq!(a.len(), 13);
    assert_eq!(a[..5], b[..5], "header and four warmup rows");
    assert_ne!(a[5..], b[5..]);
}

#[test]
fn run_directory_holds_every_artifact() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("run");
    let o = train(root.path(), &dir, &["--set", "output.selection_every=5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [artifacts::METRICS_FILE, artifacts::SUMMARY_FILE, artifacts::CONFIG_FILE, artifacts::CHECKPOINT_FILE] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let dumps: Vec<_> = [4, 9, 11].iter().map(|&e| artifacts::selection_path(&dir, e)).collect();
    assert!(dumps.iter().all(|p| p.is_file()));
    assert_eq!(std::fs::read_dir(dir.join(artifacts::SELECTION_DIR)).unwrap().count(), 3);

    let line = std::fs::read_to_string(&dumps[2]).unwrap();
    let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    for key in ["epoch", "id", "d", "P", "s", "set", "target"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    assert_eq!(line.lines().count(), 300);

    let summary = Summary::load(&dir.join(artifacts::SUMMARY_FILE)).unwrap();
    assert_eq!(summary.variant, "full");
    assert_eq!(summary.epochs, 12);
    assert!(summary.wall_clock_seconds >= 0.0);
    let rows = artifacts::read_metrics(&dir.join(artifacts::METRICS_FILE)).unwrap();
    assert_eq!(summary.last10_mean, artifacts::last10(&rows));

    // the echoed config alone reproduces the run
    let again = root.path().join("again");
    let o = olnl(root.path(), &["train", "--config", dir.join("config.toml").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(dir.join(artifacts::METRICS_FILE)).unwrap(),
        std::fs::read(again.join(artifacts::METRICS_FILE)).unwrap()
    );
}

#[test]
fn interrupted_and_resumed_run_matches_a_straight_run() {
    let root = tempfile::tempdir().unwrap();
    let (straight, split) = (root.path().join("straight"), root.path().join("split"));
    assert!(train(root.path(), &straight, &[]).status.success());
    let o = train(root.path(), &split, &["--until", "7"]);
    assert!(o.status.success());
    assert!(!split.join(artifacts::SUMMARY_FILE).exists());
    assert!(train(root.path(), &split, &["--resume"]).status.success());
    for f in [artifacts::METRICS_FILE, artifacts::CHECKPOINT_FILE] {
        assert_eq!(std::fs::read(straight.join(f)).unwrap(), std::fs::read(split.join(f)).unwrap(), "{f}");
    }

    // resuming under a different configuration is refused
    let o = train(root.path(), &split, &["--resume", "--lr", "0.02"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_recomputes_the_final_test_accuracy() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("run");
    assert!(train(root.path(), &dir, &[]).status.success());
    let o = olnl(root.path(), &["eval", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let eval: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("eval.json")).unwrap()).unwrap();
    let summary = Summary::load(&dir.join(artifacts::SUMMARY_FILE)).unwrap();
    assert_eq!(eval["test_acc"].as_f64(), summary.final_test_acc);
    assert_eq!(eval["epoch"].as_u64(), Some(12));
    let counts: u64 = eval["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(counts, 300);
}

#[test]
fn report_lists_missing_artifacts() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("run");
    assert!(train(root.path(), &dir, &[]).status.success());
    let o = olnl(root.path(), &["report", dir.to_str().unwrap(), "/no/such/run", "/no/other/run"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("/no/such/run/summary.json") && err.contains("/no/other/run/summary.json"), "{err}");

    let o = olnl(root.path(), &["report", dir.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(root.path().join("report.md").is_file() && root.path().join("report.csv").is_file());
}

#[test]
fn ablate_runs_the_grid_and_tabulates_it() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("grid");
    let mut args = vec!["ablate", "--variants", "full,no-both,standard", "--seeds", "0,1", "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    let o = olnl(root.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "setting,variant,runs,mean,std");
    let variants: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(variants, ["full", "no-both", "standard"]);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(2) == Some("2")));
    assert_eq!(std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count(), 6);
}
