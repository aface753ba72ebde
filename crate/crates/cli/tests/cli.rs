use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_dnarate");
const CHANNEL: [&str; 6] = ["--c", "2", "--beta", "0.05", "--p", "0.1"];

fn dnarate(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("DNARATE_THREADS")
        .output()
        .expect("spawn dnarate")
}

fn with_channel<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut all = args.to_vec();
    all.extend(CHANNEL);
    all
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = with_channel(args);
    all.extend(["--format", "json"]);
    serde_json::from_str(&stdout(&dnarate(&all))).unwrap()
}

#[test]
fn capacity_summary() {
    assert_eq!(stdout(&dnarate(&with_channel(&["capacity"]))).trim(), "0.590899");
}

#[test]
fn validation_errors_name_the_flag() {
    let out = dnarate(&["capacity", "--c", "2", "--beta", "0.05", "--p", "0.6"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--p"));

    let out = dnarate(&["capacity", "--c", "2", "--p", "0.1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--beta"));

    let out = dnarate(&with_channel(&["rate", "--K", "2", "--rix", "0.01", "--rin", "0.5"]));
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--rix"));
}

#[test]
fn oversized_exact_enumeration_is_infeasible() {
    let out = dnarate(&[
        "rate", "--c", "10", "--beta", "0.05", "--p", "0.1", "--K", "1000", "--rix", "0.5", "--rin", "0.5", "--method",
        "exact",
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--method mc"));
}

#[test]
fn simulate_rejects_zero_trials_and_large_instances() {
    let scheme = ["--K", "2", "--rix", "0.5", "--rin", "0.3", "--rout", "0.5"];
    let mut args = with_channel(&["simulate", "--M", "256", "--trials", "0"]);
    args.extend(scheme);
    assert_eq!(code(&dnarate(&args)), 2);

    let mut args = with_channel(&["simulate", "--M", "1048576", "--trials", "1"]);
    args.extend(scheme);
    let out = dnarate(&args);
    assert_eq!(code(&out), 5);
    assert!(String::from_utf8_lossy(&out.stderr).contains("try M <="));
}

#[test]
fn io_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no/such/dir/out.csv");
    let out = dnarate(&with_channel(&["capacity", "--out", missing.to_str().unwrap()]));
    assert_eq!(code(&out), 4);

    let junk = dir.path().join("junk.dnac");
    fs::write(&junk, b"not a dump").unwrap();
    let out = dnarate(&with_channel(&[
        "replay",
        "--K",
        "1",
        "--rix",
        "0.5",
        "--rin",
        "0.3",
        "--rout",
        "0.5",
        "--input",
        junk.to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 4);
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(&config, "# channel\nc = 4\nbeta = 0.05\np = 0.1\n").unwrap();
    let path = config.to_str().unwrap();
    assert_eq!(stdout(&dnarate(&["capacity", "--config", path])).trim(), "0.807848");
    assert_eq!(
        stdout(&dnarate(&["capacity", "--config", path, "--c", "1"])).trim(),
        "0.370762"
    );

    fs::write(&config, "colour = red\n").unwrap();
    assert_eq!(code(&dnarate(&["capacity", "--config", path])), 2);
}

#[test]
fn curve_rows_match_point_evaluations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let args = with_channel(&[
        "curve",
        "--sweep",
        "R_in",
        "--values",
        "0.2,0.35,0.5",
        "--K",
        "3",
        "--rix",
        "0.5",
        "--rout",
        "1",
        "--method",
        "exact",
        "--out",
        out.to_str().unwrap(),
    ]);
    stdout(&dnarate(&args));
    let body = fs::read_to_string(&out).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("sweep_var,R_ix,R_in,R_out,R,stderr,method"));
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let r_out: f64 = fields[3].parse().unwrap();
        let point = json(&[
            "rate", "--K", "3", "--rix", "0.5", "--rin", fields[2], "--method", "exact",
        ]);
        let expected = point["estimate"]["value"].as_f64().unwrap();
        assert!((r_out - expected).abs() <= 1e-9, "{line} vs {expected}");
    }
}

#[test]
fn replay_reproduces_the_dumped_trial() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("trial.dnac");
    let dump = dump.to_str().unwrap();
    let scheme = ["--K", "2", "--rix", "0.5", "--rin", "0.3", "--rout", "0.5"];
    let mut args = with_channel(&["simulate", "--M", "512", "--trials", "3", "--seed", "4", "--dump", dump]);
    args.extend(scheme);
    let simulated = stdout(&dnarate(&args));

    let mut args = vec!["replay", "--p", "0.1", "--input", dump];
    args.extend(scheme);
    let replayed = stdout(&dnarate(&args));
    let first: Vec<&str> = simulated.lines().take(2).collect();
    assert_eq!(replayed.lines().collect::<Vec<_>>(), first);
}

#[test]
fn reruns_are_identical() {
    let args = with_channel(&[
        "rate", "--K", "4", "--rix", "0.5", "--rin", "0.4", "--method", "mc", "--seed", "3",
    ]);
    assert_eq!(dnarate(&args).stdout, dnarate(&args).stdout);
    let other = with_channel(&[
        "rate", "--K", "4", "--rix", "0.5", "--rin", "0.4", "--method", "mc", "--seed", "4",
    ]);
    assert_ne!(dnarate(&args).stdout, dnarate(&other).stdout);
}
