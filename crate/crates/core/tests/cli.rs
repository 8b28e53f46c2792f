use std::process::Command;

use serde_json::Value;

const U02: &str = r#"{"kind":"uniform","lo":0,"hi":2}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robust-coase"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn exit_codes() {
    let bad_json = bin().args(["robust", "--dist", "{oops", "--delta", "0.5"]).output().unwrap();
    assert_eq!(bad_json.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&bad_json.stderr).lines().count(), 1);

    let unknown = bin().args(["press", "--dist", U02, "--frob"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    let bad_tol = bin().args(["robust", "--dist", U02, "--delta", "0.5", "--horizon", "2", "--grid-n", "3"]).output().unwrap();
    assert_eq!(bad_tol.status.code(), Some(2));

    // The no-gap infinite game does not settle when buyers are this patient.
    let slow = bin()
        .args(["robust", "--dist", U02, "--delta", "0.99", "--no-gap", "--grid-n", "64"])
        .output()
        .unwrap();
    assert_eq!(slow.status.code(), Some(3), "{}", String::from_utf8_lossy(&slow.stderr));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eq.json");
    let stdout = run_ok(&["robust", "--dist", U02, "--delta", "0.5", "--horizon", "2", "--out", path.to_str().unwrap()]);
    assert!(stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!((v["profit"].as_f64().unwrap() - 0.225).abs() < 1e-9);
}

#[test]
fn robust_csv_table() {
    let out = run_ok(&["robust", "--dist", U02, "--delta", "0.5", "--horizon", "2", "--csv"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "period,price,cutoff,threshold,residual");
    assert!(lines[1].starts_with("1,0.45,0.6,1.2,"));
    assert!(lines[2].starts_with("2,0.3,0.3,0.6,"));
}

#[test]
fn compare_is_independent_of_pool_size() {
    let one = run_ok(&["compare", "--dist", U02, "--jobs", "1"]);
    let many = bin()
        .args(["compare", "--dist", U02])
        .env("ROBUST_COASE_JOBS", "4")
        .output()
        .unwrap();
    assert_eq!(one, String::from_utf8(many.stdout).unwrap());
    assert_eq!(one.lines().count(), 20);
}

#[test]
fn numbers_have_at_most_twelve_significant_digits() {
    let out = run_ok(&["benchmarks", "naive", "--delta", "0.3"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    for (_, x) in v.as_object().unwrap() {
        if let Some(x) = x.as_f64() {
            let digits: String = format!("{x:e}").split('e').next().unwrap().chars().filter(char::is_ascii_digit).collect();
            assert!(digits.len() <= 12, "{x}");
        }
    }
}

#[test]
fn simulate_profile_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("p1.json");
    let p2 = dir.path().join("p2.json");
    let common = ["--dist", U02, "--delta", "0.5", "--horizon", "2", "--paths", "5000", "--seed", "11"];
    let a = run_ok(&[&["simulate", "--save-profile", p1.to_str().unwrap()][..], &common[..]].concat());
    let b = run_ok(&[&["simulate", "--profile", p1.to_str().unwrap(), "--save-profile", p2.to_str().unwrap()][..], &common[..]].concat());
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    let (a, b): (Value, Value) = (serde_json::from_str(&a).unwrap(), serde_json::from_str(&b).unwrap());
    assert_eq!(a["profit"], b["profit"]);
    assert_eq!(a["sale_time_histogram"], b["sale_time_histogram"]);
}

#[test]
fn seeds_change_samples_only() {
    let base = ["simulate", "--dist", U02, "--delta", "0.5", "--horizon", "2", "--paths", "2000"];
    let s1: Value = serde_json::from_str(&run_ok(&[&base[..], &["--seed", "1"]].concat())).unwrap();
    let s1b: Value = serde_json::from_str(&run_ok(&[&base[..], &["--seed", "1"]].concat())).unwrap();
    let s2: Value = serde_json::from_str(&run_ok(&[&base[..], &["--seed", "2"]].concat())).unwrap();
    assert_eq!(s1, s1b);
    assert_ne!(s1["profit"], s2["profit"]);
    assert_eq!(s1["analytic_profit"], s2["analytic_profit"]);
}

#[test]
fn every_subcommand_runs() {
    let u51 = r#"{"kind":"uniform","lo":0.5,"hi":1}"#;
    run_ok(&["press", "--dist", U02, "--csv"]);
    run_ok(&["solve", "--dist", u51, "--delta", "0.9"]);
    run_ok(&["solve", "--dist", U02, "--delta", "0.5", "--horizon", "3", "--pressed"]);
    run_ok(&["worst-case", "--dist", U02, "--delta", "0.5", "--prices", "0.45,0.3"]);
    run_ok(&["check", "--prm", "--lipschitz", "--dist", r#"{"kind":"power","n":8,"lo":0.5,"hi":1.5}"#]);
    run_ok(&["benchmarks", "discrete", "--q", "0.5", "--delta", "0.75"]);
    run_ok(&["benchmarks", "constant-price", "--dist", U02, "--delta", "0.5", "--vstar", "0.5", "--periods", "4"]);
    run_ok(&["benchmarks", "nogap", "--dist", U02, "--delta", "0.95", "--partition", "[[0,1],[1,2]]"]);
    run_ok(&["simulate", "--profile", "commitment", "--dist", U02, "--delta", "0.5", "--horizon", "2", "--paths", "100", "--csv"]);
}
