//! End-to-end checks of the command-line interface: the generate, assign,
//! analyze, simulate, experiment, report pipeline, plus exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mcsched"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn mcsched")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("mcsched-cli-{tag}-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

#[test]
fn generate_assign_analyze_simulate_pipeline() {
    let tmp = TempDir::new("pipeline");
    let dir = &tmp.0;

    let out = run(
        dir,
        &[
            "generate", "--m", "2", "--ub", "0.80", "--ph", "0.5", "--seed", "42", "--out",
            "ts.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    // Deterministic generation: same seed, same bytes.
    let first = fs::read(dir.join("ts.json")).unwrap();
    let out = run(
        dir,
        &[
            "generate", "--m", "2", "--ub", "0.80", "--ph", "0.5", "--seed", "42", "--out",
            "ts2.json",
        ],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(first, fs::read(dir.join("ts2.json")).unwrap());

    let out = run(
        dir,
        &["assign", "--taskset", "ts.json", "--algo", "soma", "--out", "a.json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(
        dir,
        &["analyze", "--taskset", "ts.json", "--test", "multi", "--assignment", "a.json"],
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("schedulable"));

    let out = run(
        dir,
        &["assign", "--taskset", "ts.json", "--algo", "dualrate", "--out", "d.json"],
    );
    assert_eq!(code(&out), 0);
    let out = run(
        dir,
        &["analyze", "--taskset", "ts.json", "--test", "dual", "--assignment", "d.json"],
    );
    assert_eq!(code(&out), 0);

    // Hand-written scenario: single job of the first task, no overrun.
    let ts: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("ts.json")).unwrap()).unwrap();
    let first_task = ts["tasks"][0]["id"].as_str().unwrap();
    let demand = ts["tasks"][0]["CL"].as_str().unwrap();
    let scenario = format!(
        r#"{{"horizon": "400", "releases": {{"{first_task}": ["0"]}},
            "demands": {{"{first_task}": ["{demand}"]}}, "switch": {{"policy": "none"}}}}"#
    );
    fs::write(dir.join("s.json"), scenario).unwrap();
    let out = run(
        dir,
        &[
            "simulate", "--taskset", "ts.json", "--assignment", "a.json", "--scenario",
            "s.json", "--trace", "out.trace",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(dir.join("out.trace")).unwrap();
    assert!(trace.starts_with("# switch=none\ncore,task,start,end\n"));
}

#[test]
fn infeasible_verdicts_exit_one() {
    let tmp = TempDir::new("verdicts");
    let dir = &tmp.0;

    // A HI-overloaded system no assigner can schedule.
    fs::write(
        dir.join("ts.json"),
        r#"{"m": 2, "tasks": [
            {"id": "a", "T": "2", "chi": "HI", "CL": "1", "CH": "2"},
            {"id": "b", "T": "2", "chi": "HI", "CL": "1", "CH": "2"},
            {"id": "c", "T": "2", "chi": "HI", "CL": "1", "CH": "2"}
        ]}"#,
    )
    .unwrap();
    let out = run(dir, &["assign", "--taskset", "ts.json", "--algo", "dualrate"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("infeasible"));
    let out = run(dir, &["assign", "--taskset", "ts.json", "--algo", "soma"]);
    assert_eq!(code(&out), 1);

    // A failing dual-rate test exits 1 and names the condition.
    fs::write(
        dir.join("bad.json"),
        r#"{"thetaL": {"a": "0.4", "b": "0.5", "c": "0.5"},
            "thetaH": {"a": "1", "b": "1", "c": "1"}}"#,
    )
    .unwrap();
    let out = run(
        dir,
        &["analyze", "--taskset", "ts.json", "--test", "dual", "--assignment", "bad.json"],
    );
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("not schedulable"));
}

#[test]
fn input_errors_exit_two() {
    let tmp = TempDir::new("errors");
    let dir = &tmp.0;

    let out = run(dir, &["analyze", "--taskset", "missing.json", "--test", "dual", "--assignment", "x.json"]);
    assert_eq!(code(&out), 2);

    fs::write(dir.join("junk.json"), "{not json").unwrap();
    let out = run(dir, &["assign", "--taskset", "junk.json", "--algo", "soma"]);
    assert_eq!(code(&out), 2);

    // Unknown keys are rejected by the schema.
    fs::write(
        dir.join("extra.json"),
        r#"{"m": 1, "tasks": [], "surprise": true}"#,
    )
    .unwrap();
    let out = run(dir, &["assign", "--taskset", "extra.json", "--algo", "soma"]);
    assert_eq!(code(&out), 2);

    // Bad flags come back as usage errors (clap uses exit code 2).
    let out = run(dir, &["generate", "--m", "2", "--ub", "not-a-number"]);
    assert_eq!(code(&out), 2);

    let out = run(dir, &["report", "--input", "nope.csv", "--format", "svg"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn experiment_and_report_round_trip() {
    let tmp = TempDir::new("experiment");
    let dir = &tmp.0;

    let args = [
        "experiment", "--m", "2", "--ub-grid", "0.60:0.80:0.10", "--trials", "8", "--seed",
        "5", "--out", "results.csv",
    ];
    let out = run(dir, &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("results.csv")).unwrap();
    assert!(csv.starts_with("m,param_name,param_value,algorithm,accepted,total,ratio\n"));
    // 3 grid points x 2 algorithms.
    assert_eq!(csv.lines().count(), 7);

    // Identical seeds reproduce identical bytes.
    let out = run(
        dir,
        &[
            "experiment", "--m", "2", "--ub-grid", "0.60:0.80:0.10", "--trials", "8", "--seed",
            "5", "--out", "again.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(csv, fs::read_to_string(dir.join("again.csv")).unwrap());

    let out = run(
        dir,
        &["report", "--input", "results.csv", "--format", "svg", "--out", "plot.svg"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let svg = fs::read_to_string(dir.join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 2);

    let out = run(dir, &["report", "--input", "results.csv", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout), csv);
}
