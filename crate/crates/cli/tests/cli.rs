use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

// One input, one hidden tanh unit, one output: u ≈ -0.5 tanh(x).
const NET: &str = "1\n1\n1\n1\ntanh\nlinear\n1.0\n0.0\n-0.5\n0.0\n";

fn system(goal: (f64, f64)) -> String {
    format!(
        r#"{{
  "state_vars": ["x"],
  "control_vars": ["u"],
  "dynamics": ["-x + u"],
  "control_step": 0.25,
  "steps": 4,
  "init": [[0.9, 1.0]],
  "goal": [[{}, {}]],
  "model": "net.nn",
  "params": {{"degree": [2], "delta_bar": 0.01}}
}}"#,
        goal.0, goal.1
    )
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(goal: (f64, f64)) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("net.nn"), NET).unwrap();
        fs::write(dir.path().join("sys.json"), system(goal)).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nncs-reach")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn verify_yes_exits_zero_with_json() {
    let f = Fixture::new((0.0, 0.6));
    let sys = f.path("sys.json");
    let net = f.path("net.nn");
    let out = run(&["verify", "--model", s(&net), "--system", s(&sys), "--degree", "3", "--delta", "0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["kind"], "Yes");
    assert_eq!(v["step"], 4);
}

#[test]
fn verify_unknown_exits_one() {
    let f = Fixture::new((2.0, 3.0));
    let out = run(&["verify", "--system", s(&f.path("sys.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["kind"], "Unknown");
}

#[test]
fn interval_mode_runs_baseline() {
    let f = Fixture::new((0.0, 0.6));
    let fp = f.path("pipes.json");
    let out = run(&["verify", "--system", s(&f.path("sys.json")), "--mode", "interval", "--flowpipes", s(&fp)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    // The baseline carries no sampling error.
    assert!(v["eps"].as_array().unwrap().iter().all(|e| e[0] == 0.0));
    let pipes: serde_json::Value = serde_json::from_str(&fs::read_to_string(fp).unwrap()).unwrap();
    assert_eq!(pipes["step_boxes"].as_array().unwrap().len(), 5);
    assert!(!pipes["flowpipes"].as_array().unwrap().is_empty());
}

#[test]
fn unknown_flag_prints_synopsis() {
    let out = run(&["verify", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage:"), "{err}");
}

#[test]
fn bad_input_exits_two() {
    let f = Fixture::new((0.0, 0.6));
    fs::write(f.path("broken.json"), "{\"state_vars\": []}").unwrap();
    let out = run(&["verify", "--system", s(&f.path("broken.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = run(&["verify", "--system", s(&f.path("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn approx_and_lipschitz_print_json() {
    let f = Fixture::new((0.0, 0.6));
    let net = f.path("net.nn");
    let out = run(&["approx", "--model", s(&net), "--box", "-1,1", "--degree", "3", "--delta", "0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let eps = v["outputs"][0]["eps"].as_f64().unwrap();
    assert!(eps > 0.0 && eps < 0.1, "{eps}");

    let out = run(&["lipschitz", "--model", s(&net), "--box", "-1,1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let text = v.to_string();
    assert!(text.contains("0.5"), "{text}");
}

#[test]
fn simulate_writes_csv_and_svg() {
    let f = Fixture::new((0.0, 0.6));
    let csv = f.path("runs.csv");
    let svg = f.path("runs.svg");
    let out = run(&[
        "simulate", "--system", s(&f.path("sys.json")), "--count", "3", "--csv", s(&csv), "--svg", s(&svg), "--dims", "0,0",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next(), Some("run,t,x"));
    // Three runs of 4 periods at 200 steps each, plus the initial rows.
    assert_eq!(text.lines().count(), 1 + 3 * (4 * 200 + 1));
    let plot = fs::read_to_string(svg).unwrap();
    assert_eq!(plot.matches("class=\"trajectory\"").count(), 3);
}

#[test]
fn verify_svg_draws_flowpipes() {
    let f = Fixture::new((0.0, 0.6));
    let svg = f.path("v.svg");
    let out = run(&["verify", "--system", s(&f.path("sys.json")), "--svg", s(&svg), "--dims", "0,0", "--trajectories", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let plot = fs::read_to_string(svg).unwrap();
    assert!(plot.contains("class=\"flowpipe\"") && plot.contains("class=\"goal\""));
    assert_eq!(plot.matches("class=\"trajectory\"").count(), 2);
}
