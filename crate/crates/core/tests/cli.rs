use std::path::Path;
use std::process::{Command, Output};

use peakon_lab::export::read_profile_csv;
use peakon_lab::field::eval_u;
use peakon_lab::PeakonState;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_peakon-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

/// Rows of the first CSV block, as numbers (event column dropped).
fn first_block(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .take_while(|l| !l.starts_with('#'))
        .map(|l| {
            l.split(',').filter(|v| !v.is_empty() && !v.starts_with("merge")).map(|v| v.parse().unwrap()).collect()
        })
        .collect()
}

#[test]
fn simulate_single_peakon_is_linear() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "one.json",
        r#"{"q": [0.5], "p": [1.25], "t_end": 4.0, "outputs": {"trajectory": "one.csv", "events": "one_events.json"}}"#,
    );
    let out = run(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    assert!(csv.starts_with("t,q1,p1,H0,event\n"));
    let rows = first_block(&csv);
    assert!(rows.len() >= 2);
    for r in &rows {
        assert!((r[1] - (0.5 + 1.25 * r[0])).abs() < 1e-9);
        assert_eq!(r[2], 1.25);
    }
    assert_eq!(rows.last().unwrap()[0], 4.0);
    let events: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("one_events.json")).unwrap()).unwrap();
    assert_eq!(events.as_array().unwrap().len(), 0);
}

#[test]
fn simulate_peakon_antipeakon_merges_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "pa.json", r#"{"q": [1.0, -1.0], "p": [-1.0, 1.0], "t_end": 3.0}"#);
    let out = run(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let events: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pa.events.json")).unwrap()).unwrap();
    let events = events.as_array().unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["pair"], 1);
    assert_eq!(events[0]["psi"], 0.0);

    let csv = std::fs::read_to_string(dir.path().join("pa.trajectory.csv")).unwrap();
    let after: Vec<&str> = csv.lines().skip_while(|l| !l.starts_with("# merged")).collect();
    assert!(after[0].starts_with("# merged k=1 t*="));
    assert_eq!(after[1], "t,q1,p1,H0,event");
    for row in &after[2..] {
        let cols: Vec<f64> = row.split(',').filter(|v| !v.is_empty()).map(|v| v.parse().unwrap()).collect();
        let state = PeakonState::new(vec![cols[1]], vec![cols[2]], cols[0]).unwrap();
        for x in [-2.0, 0.0, 0.3, 5.0] {
            assert_eq!(eval_u(&state, x), 0.0);
        }
    }
}

#[test]
fn simulate_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"q": [0.0], "p": "#);
    let out = run(&["simulate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["simulate", "--config", missing.to_str().unwrap()]).status.code(), Some(1));

    let invalid = write(dir.path(), "tol.json", r#"{"q": [0.0], "p": [1.0], "t_end": 1.0, "merge_gap": 1e-13}"#);
    assert_eq!(run(&["simulate", "--config", &invalid]).status.code(), Some(1));

    let budget = write(
        dir.path(),
        "steps.json",
        r#"{"q": [1.0, 0.0, -1.0], "p": [1.0, 2.0, 3.0], "t_end": 50.0, "max_steps": 3}"#,
    );
    let out = run(&["simulate", "--config", &budget]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integration failed"));
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"n": 4, "seed": 17, "t_end": 5.0, "convention": "rescaled", "outputs": {"trajectory": "t.csv", "events": "e.json"}}"#;
    let cfg = write(dir.path(), "r.json", text);
    assert_eq!(run(&["simulate", "--config", &cfg]).status.code(), Some(0));
    let first = (std::fs::read(dir.path().join("t.csv")).unwrap(), std::fs::read(dir.path().join("e.json")).unwrap());
    assert_eq!(run(&["simulate", "--config", &cfg]).status.code(), Some(0));
    let second = (std::fs::read(dir.path().join("t.csv")).unwrap(), std::fs::read(dir.path().join("e.json")).unwrap());
    assert_eq!(first, second);
}

#[test]
fn integrals_values_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let state = write(dir.path(), "s.json", r#"{"q": [0.0], "p": [2.0]}"#);
    let out = run(&["integrals", "--state", &state, "--s", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let values: Vec<f64> = v.as_array().unwrap().iter().map(|x| x["value"].as_f64().unwrap()).collect();
    assert_eq!(values[0], 2.0);
    assert_eq!(values[1], 2.0);
    assert!((values[2] - 8.0 / 3.0).abs() < 1e-15);
    assert_eq!(v[2]["convention"], "theorem");

    let out = run(&["integrals", "--state", &state, "--s", "1", "--rescaled"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[1]["value"], 4.0);
    assert_eq!(v[1]["convention"], "rescaled");

    let out = run(&["integrals", "--state", &state, "--s", "15"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));

    assert_eq!(run(&["integrals", "--state", &state, "--s", "1", "--n", "2"]).status.code(), Some(1));
}

#[test]
fn verify_subcommands() {
    for args in [
        vec!["verify", "csum", "--s", "7"],
        vec!["verify", "sn", "--n", "3", "--samples", "50"],
        vec!["verify", "recursion", "--n", "3", "--samples", "20"],
        vec!["verify", "involution", "--n", "3", "--samples", "20"],
        vec!["verify", "collision2", "--grid", "20"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(rep["pass"], true);
    }
    let out = run(&["verify", "involution", "--n", "3", "--samples", "5", "--tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(4));
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["pass"], false);
    assert!(!rep["failures"].as_array().unwrap().is_empty());

    assert_eq!(run(&["verify", "sn", "--samples", "0"]).status.code(), Some(1));
    assert_eq!(run(&["verify"]).status.code(), Some(1));
}

#[test]
fn verify_output_independent_of_thread_count() {
    let args = ["verify", "recursion", "--n", "4", "--samples", "40", "--seed", "5"];
    let one = bin().args(args).env("PEAKON_LAB_THREADS", "1").output().unwrap();
    let four = bin().args(args).env("PEAKON_LAB_THREADS", "4").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    let bad = bin().args(args).env("PEAKON_LAB_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn profile_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let state_path = write(dir.path(), "s.json", r#"{"t": 0.0, "q": [0.25], "p": [1.5]}"#);
    let csv = dir.path().join("prof.csv");
    let csv_s = csv.to_str().unwrap();
    let out = run(&[
        "profile",
        "--state",
        &state_path,
        "--xmin",
        "-3.75",
        "--xmax",
        "4.25",
        "--points",
        "81",
        "--output",
        csv_s,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let rows = read_profile_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 81);
    let state = PeakonState::new(vec![0.25], vec![1.5], 0.0).unwrap();
    let total: f64 = rows.iter().map(|r| r[1]).sum();
    let expect: f64 = rows.iter().map(|r| eval_u(&state, r[0])).sum();
    assert_eq!(total, expect);
    // symmetric about the peak
    for i in 0..rows.len() {
        let j = rows.len() - 1 - i;
        assert!((rows[i][1] - rows[j][1]).abs() < 1e-15);
    }
    let (imax, _) = rows.iter().enumerate().max_by(|a, b| a.1[1].total_cmp(&b.1[1])).unwrap();
    assert_eq!(rows[imax][0], 0.25);

    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("prof.json")).unwrap()).unwrap();
    assert_eq!(sidecar["n"], 1);
    assert_eq!(sidecar["q"][0], 0.25);

    let code = |extra: [&str; 4]| {
        let mut args = vec!["profile", "--state", &state_path, "--output", csv_s];
        args.extend(extra);
        run(&args).status.code()
    };
    assert_eq!(code(["--xmin", "-1", "--xmax", "1"]), Some(1)); // missing --points
    let out =
        run(&["profile", "--state", &state_path, "--xmin", "-1", "--xmax", "1", "--points", "0", "--output", csv_s]);
    assert_eq!(out.status.code(), Some(1));
    let out =
        run(&["profile", "--state", &state_path, "--xmin", "2", "--xmax", "1", "--points", "5", "--output", csv_s]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).contains("x,u,ux"));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("simulate"));
    assert_eq!(run(&["verify", "--help"]).status.code(), Some(0));
}
