//! End-to-end tests of the command-line binary: exit codes, JSON/CSV output,
//! flag precedence, and byte-level determinism.

use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delayed-binomial"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const WORKED: &str = r#"{
    "market": {"s0": 4, "u": 2, "d": 0.5, "r": 0, "n_periods": 2, "delay": 1},
    "payoff": {"kind": "call", "strike": 4}
}"#;

#[test]
fn price_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "worked.json", WORKED);
    let out = run(&["price", "--config", &config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["price_dp"].as_f64().unwrap(), 5.6);
    assert_eq!(v["price_direct"].as_f64().unwrap(), 5.6);
    assert_eq!(v["hedge"]["delta_star"].as_f64().unwrap(), 0.8);
}

#[test]
fn verify_passes_in_window_and_flags_arbitrage_outside() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "ok.json", WORKED);
    let out = run(&["verify", "--config", &config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["feasible"], Value::Bool(true));
    assert_eq!(v["arbitrage_found"], Value::Bool(false));
    assert!(v["price_lp"].as_f64().unwrap() <= v["price_dp"].as_f64().unwrap() + 1e-8);

    let bad = write_config(
        &dir,
        "bad.json",
        r#"{"market": {"s0": 4, "u": 1.05, "d": 0.9, "r": 0.2, "n_periods": 3, "delay": 1}}"#,
    );
    let out = run(&["verify", "--config", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["arbitrage_found"], Value::Bool(true));
}

#[test]
fn exit_codes_for_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    // Malformed JSON.
    let broken = write_config(&dir, "broken.json", "{nope");
    assert_eq!(run(&["price", "--config", &broken]).status.code(), Some(2));
    // Missing sections.
    let empty = write_config(&dir, "empty.json", "{}");
    assert_eq!(run(&["price", "--config", &empty]).status.code(), Some(2));
    // Unknown subcommand is a usage error.
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    // Size caps exit 3.
    let big = write_config(
        &dir,
        "big.json",
        r#"{"market": {"s0": 4, "u": 2, "d": 0.5, "r": 0, "n_periods": 40, "delay": 1},
            "payoff": {"kind": "call", "strike": 4}}"#,
    );
    assert_eq!(run(&["verify", "--config", &big]).status.code(), Some(3));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "worked.json", WORKED);
    // --h 0 turns the market into a plain no-delay tree: price drops to 4/3.
    let out = run(&["price", "--config", &config, "--h", "0"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["price_dp"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-9);

    // --strike replaces the configured strike.
    let out = run(&["price", "--config", &config, "--strike", "0.5"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["price_dp"].as_f64().unwrap() > 3.4);
}

#[test]
fn smile_defaults_and_strike_flag() {
    let out = run(&["smile"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "strike,price_call,price_put,iv_call,iv_put,flag_call,flag_put"
    );
    assert_eq!(lines.count(), 41);

    let out = run(&["smile", "--strike", "40"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("4e1,"));
}

#[test]
fn converge_csv_marks_invalid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        &dir,
        "sweep.json",
        r#"{"scaling": {"s0": 40, "mu": 2.0, "sigma": 0.1, "h_periods": 1, "n": 100},
            "n_values": [4, 900]}"#,
    );
    let out = run(&["converge", "--config", &config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("n,delta_n,"));
    // n = 4 is below the validity threshold for mu = 2, sigma = 0.1.
    assert!(lines[1].starts_with("4,nan"), "{}", lines[1]);
    assert!(lines[2].starts_with("900,"), "{}", lines[2]);
}

#[test]
fn output_is_deterministic_and_file_writable() {
    let a = run(&["smile", "--n", "60"]);
    let b = run(&["smile", "--n", "60"]);
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("smile.csv");
    let out = run(&["smile", "--n", "60", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), a.stdout);
}
