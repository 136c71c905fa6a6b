//! End-to-end runs of the `crtractor` binary.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crtractor")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lists_examples_and_checks() {
    let o = run(&["list-examples"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["heisenberg_m1", "heisenberg_m2", "heisenberg_m2_rescaled", "deformed_m2"] {
        assert!(text.contains(name), "{name} missing");
    }
    let o = run(&["list-checks"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l.starts_with("algebra.jacobi")));
}

#[test]
fn passing_suite_exits_zero_with_valid_json() {
    let o = run(&[
        "verify",
        "--example",
        "heisenberg_m2",
        "--suite",
        "algebra.jacobi,webster",
        "--points",
        "2",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["meta"]["schema_version"], 1);
    assert_eq!(v["meta"]["points"], 2);
    assert_eq!(v["checks"].as_array().unwrap().len(), 4);
}

#[test]
fn failing_check_exits_one() {
    let o = run(&["verify", "--example", "heisenberg_m1", "--suite", "flat.fefferman_ricci", "--points", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL  flat.fefferman_ricci"));
}

#[test]
fn writes_report_to_file() {
    let path = std::env::temp_dir().join(format!("crtractor-cli-{}.txt", std::process::id()));
    let o =
        run(&["verify", "--example", "deformed_m2", "--suite", "cr", "--points", "2", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(text.contains("PASS  cr.integrability"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["verify", "--example", "sphere"],
        vec!["verify", "--example", "heisenberg_m1", "--format", "yaml"],
        vec!["verify", "--example", "heisenberg_m1", "--points", "0"],
        vec!["verify", "--example", "heisenberg_m1", "--suite", "nothing"],
        vec!["verify", "--example", "heisenberg_m1", "--tol", "-1"],
        vec!["frobnicate"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}
