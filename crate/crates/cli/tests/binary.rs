//! End-to-end checks of the `privnet` executable.

use std::path::Path;
use std::process::{Command, Output};

use privnet_cli::config::ExperimentConfig;
use privnet_cli::{read_csv, run_experiment, ResultRow, CSV_HEADER};

fn privnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privnet"))
        .args(args)
        .env("PRIVNET_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_one_row_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", r#"{"n_blocks": 500}"#);
    let out = privnet(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER.join(","));
    // a plain run has no axis value
    assert!(lines[1].starts_with(",0,1,"), "{}", lines[1]);
}

#[test]
fn seed_and_blocks_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", r#"{"n_blocks": 100000, "seed": 3, "gamma": 0.2}"#);
    let csv = dir.path().join("out.csv");
    let out = privnet(&["run", &cfg, "--seed", "7", "--blocks", "800", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = read_csv(&csv).unwrap();

    let config = ExperimentConfig {
        n_blocks: 800,
        seed: 7,
        gamma: 0.2,
        ..ExperimentConfig::default()
    };
    let summary = run_experiment(&config, None).unwrap();
    let expected = ResultRow::from_summary(None, &config, &summary);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].seed, Some(7));
    assert!((rows[0].utility - expected.utility).abs() <= 1e-12 * expected.utility.abs());
    assert!((rows[0].private_rate - expected.private_rate).abs() <= 1e-12 * expected.private_rate.abs().max(1e-300));
}

#[test]
fn validation_failures_exit_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"gamma": 1.5}"#);
    let out = privnet(&["run", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("gamma = 1.5 ∉ [0,1]"), "{}", stderr(&out));

    let unknown = write(dir.path(), "unknown.json", "{\n  \"v\": 10,\n  \"colour\": 1\n}");
    let out = privnet(&["run", &unknown]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("unknown.json") && err.contains("line 3"), "{err}");

    // overrides are validated too: zero blocks with a warmup of ten
    let warm = write(dir.path(), "warm.json", r#"{"warmup_blocks": 10, "n_blocks": 100}"#);
    let out = privnet(&["run", &warm, "--blocks", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn runtime_failures_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = privnet(&["run", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing.json"));

    let cfg = write(dir.path(), "run.json", r#"{"n_blocks": 100}"#);
    let out = privnet(&["run", &cfg, "--out", "/nonexistent-dir/out.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent-dir/out.csv"));
}

#[test]
fn mismatched_subcommand_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", r#"{"n_blocks": 100}"#);
    assert_eq!(privnet(&["sweep", &cfg]).status.code(), Some(1));
    let sweep = write(dir.path(), "sweep.json", r#"{"n_blocks": 100, "sweep": {"axis": "gamma", "values": [0.1]}}"#);
    assert_eq!(privnet(&["run", &sweep]).status.code(), Some(1));
}

#[test]
fn sweep_writes_csv_and_plot_and_plot_rerenders_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"n_blocks": 600, "sweep": {"axis": "V", "values": [10, 50, 250], "seeds_per_point": 2}}"#,
    );
    let csv = dir.path().join("v.csv");
    let svg = dir.path().join("v.svg");
    let out = privnet(&["sweep", &cfg, "--out", csv.to_str().unwrap(), "--plot", svg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = read_csv(&csv).unwrap();
    assert_eq!(rows.len(), 3 * 3);
    assert_eq!(rows.iter().filter(|r| r.is_aggregate()).count(), 3);
    let first = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(first.matches(r#"class="series""#).count(), 3);

    let again = dir.path().join("again.svg");
    let out = privnet(&["plot", csv.to_str().unwrap(), again.to_str().unwrap(), "--x-label", "V"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(&again).unwrap(), first);
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"n_blocks": 700, "sweep": {"axis": "alpha", "values": [0.5, 1.0], "realizations_per_point": 2}}"#,
    );
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        let out = privnet(&["sweep", &cfg, "--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
}

#[test]
fn per_block_runs_write_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", r#"{"n_blocks": 50, "metrics_granularity": "per_block"}"#);
    let csv = dir.path().join("run.csv");
    let out = privnet(&["run", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let trace = std::fs::read_to_string(dir.path().join("run.blocks.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "block,node,a_p,a_pe,a_o,mode,power,r_p,r_o,r_pe,q_p,q_o,q_pe,z,y");
    assert_eq!(lines.count(), 50 * 4);
}
