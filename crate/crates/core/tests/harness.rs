//! Registry coverage, determinism and report round-trips.

use std::collections::BTreeSet;

use crtractor::checks::{list_checks, run_suite, Group, RunOptions};
use crtractor::examples::builtin_examples;
use crtractor::report::{validate, Report};

fn quick(suite: &str, seed: u64) -> RunOptions {
    RunOptions { suite: suite.into(), seed, points: 3, tolerance: None }
}

#[test]
fn every_acceptance_group_has_checks_and_ids_are_unique() {
    let checks = list_checks();
    let ids: Vec<&str> = checks.iter().map(|c| c.0.as_str()).collect();
    let unique: BTreeSet<&str> = ids.iter().copied().collect();
    assert_eq!(unique.len(), ids.len());
    assert!(ids.windows(2).all(|w| w[0] < w[1]), "registry is sorted by id");
    for group in Group::ACCEPTANCE {
        assert!(checks.iter().any(|c| c.1 == group), "{group:?} has no check");
    }
}

#[test]
fn every_example_covers_the_acceptance_groups() {
    for ex in builtin_examples() {
        let r = run_suite(ex.name, &RunOptions { points: 1, ..quick("all", 5) }).unwrap();
        let groups: BTreeSet<Group> = r.checks.iter().map(|c| c.group).collect();
        for g in Group::ACCEPTANCE {
            let flat = matches!(ex.name, "heisenberg_m1" | "heisenberg_m2");
            assert_eq!(groups.contains(&g), g != Group::FlatChain || flat, "{} {g:?}", ex.name);
        }
        assert!(r.checks.iter().all(|c| c.error.is_none()), "{}", ex.name);
    }
}

#[test]
fn same_seed_gives_identical_report_body() {
    let a = run_suite("heisenberg_m1", &quick("all", 9)).unwrap();
    let b = run_suite("heisenberg_m1", &quick("all", 9)).unwrap();
    assert_eq!(serde_json::to_string(&a.checks).unwrap(), serde_json::to_string(&b.checks).unwrap());
    let c = run_suite("heisenberg_m1", &quick("all", 10)).unwrap();
    assert_ne!(serde_json::to_string(&a.checks).unwrap(), serde_json::to_string(&c.checks).unwrap());
}

#[test]
fn json_round_trips_through_validator() {
    let r = run_suite("deformed_m2", &quick("torsion,algebra.jacobi", 3)).unwrap();
    let text = r.to_json();
    let back = Report::from_json(&text).unwrap();
    assert_eq!(back, r);

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["meta"]["schema_version"] = 99.into();
    assert!(validate(&v).is_err());
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["checks"][0]["max_abs_residual"] = "big".into();
    assert!(validate(&v).is_err());
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let first = v["checks"][0].clone();
    v["checks"].as_array_mut().unwrap().push(first);
    assert!(validate(&v).is_err(), "duplicate ids are rejected");
}

#[test]
fn text_report_has_one_row_per_check() {
    let r = run_suite("heisenberg_m1", &quick("algebra", 2)).unwrap();
    let text = r.to_text();
    let rows = text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count();
    assert_eq!(rows, r.checks.len());
}

#[test]
fn tolerance_override_applies_to_every_check() {
    let r = run_suite("heisenberg_m1", &RunOptions { tolerance: Some(1.0), ..quick("flat", 4) }).unwrap();
    assert!(r.checks.iter().all(|c| c.tolerance == 1.0));
    assert!(r.all_passed(), "Ric(S,S) = 1/2 is within a tolerance of 1");
}

#[test]
fn unknown_example_is_an_error() {
    assert!(run_suite("sphere", &quick("all", 1)).is_err());
}
