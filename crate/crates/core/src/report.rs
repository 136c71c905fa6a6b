//! Machine-readable verification reports.
//!
//! Check records are sorted by id and carry no timing data, so two runs with
//! the same example, suite and seed serialize `checks` identically. Timings
//! live in `meta.wall_time_ms`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checks::{Group, ToleranceKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub example: String,
    pub suite: String,
    pub seed: u64,
    pub points: usize,
    pub tolerance_override: Option<f64>,
    pub wall_time_ms: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub group: Group,
    pub subject: String,
    pub example: String,
    pub ells: Vec<String>,
    pub points: usize,
    pub samples: usize,
    /// `None` when the residual is not finite.
    pub max_abs_residual: Option<f64>,
    pub max_rel_residual: Option<f64>,
    pub tolerance: f64,
    pub tolerance_kind: ToleranceKind,
    pub passed: bool,
    pub error: Option<String>,
    pub requirements: Vec<(String, bool)>,
    pub diagnostics: BTreeMap<String, Option<f64>>,
}

impl CheckRecord {
    /// Residual compared against the tolerance.
    pub fn measured(&self) -> Option<f64> {
        match self.tolerance_kind {
            ToleranceKind::Relative => self.max_rel_residual,
            ToleranceKind::Absolute => self.max_abs_residual,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: Meta,
    pub checks: Vec<CheckRecord>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Report, String> {
        let v: Value = serde_json::from_str(s).map_err(|e| e.to_string())?;
        validate(&v)?;
        serde_json::from_value(v).map_err(|e| e.to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let m = &self.meta;
        let _ = writeln!(out, "example {}  suite {}  seed {}  points {}", m.example, m.suite, m.seed, m.points);
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let measured = c.measured().map_or("n/a".to_string(), |v| format!("{v:.3e}"));
            let kind = match c.tolerance_kind {
                ToleranceKind::Relative => "rel",
                ToleranceKind::Absolute => "abs",
            };
            let _ = writeln!(out, "{status}  {:<40} {kind} {measured} <= {:.0e}", c.id, c.tolerance);
            if let Some(e) = &c.error {
                let _ = writeln!(out, "      error: {e}");
            }
            for (what, ok) in &c.requirements {
                if !ok {
                    let _ = writeln!(out, "      unmet: {what}");
                }
            }
            if !c.passed {
                for (k, v) in &c.diagnostics {
                    let v = v.map_or("n/a".to_string(), |v| format!("{v:.3e}"));
                    let _ = writeln!(out, "      {k} = {v}");
                }
            }
        }
        let failed = self.failures().count();
        let _ = writeln!(out, "{} checks, {} failed", self.checks.len(), failed);
        out
    }
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str, at: &str) -> Result<&'a Value, String> {
    obj.get(key).ok_or_else(|| format!("{at}: missing field `{key}`"))
}

fn number_or_null(v: &Value, at: &str) -> Result<(), String> {
    if v.is_null() || v.as_f64().is_some_and(|x| x >= 0.0) {
        Ok(())
    } else {
        Err(format!("{at}: expected a non-negative number or null"))
    }
}

/// Structural validation of a report document.
pub fn validate(v: &Value) -> Result<(), String> {
    let root = v.as_object().ok_or("report is not an object")?;
    let meta = field(root, "meta", "report")?.as_object().ok_or("meta is not an object")?;
    let version = field(meta, "schema_version", "meta")?.as_u64().ok_or("meta.schema_version is not an integer")?;
    if version != u64::from(SCHEMA_VERSION) {
        return Err(format!("unsupported schema version {version}"));
    }
    for key in ["tool", "version", "example", "suite"] {
        field(meta, key, "meta")?.as_str().ok_or_else(|| format!("meta.{key} is not a string"))?;
    }
    for key in ["seed", "points"] {
        field(meta, key, "meta")?.as_u64().ok_or_else(|| format!("meta.{key} is not an integer"))?;
    }
    let checks = field(root, "checks", "report")?.as_array().ok_or("checks is not an array")?;
    let mut previous: Option<&str> = None;
    for (i, c) in checks.iter().enumerate() {
        let at = format!("checks[{i}]");
        let c = c.as_object().ok_or_else(|| format!("{at} is not an object"))?;
        let id = field(c, "id", &at)?.as_str().ok_or_else(|| format!("{at}.id is not a string"))?;
        if previous.is_some_and(|p| p >= id) {
            return Err(format!("{at}: ids are not strictly increasing at `{id}`"));
        }
        previous = Some(id);
        field(c, "passed", &at)?.as_bool().ok_or_else(|| format!("{at}.passed is not a boolean"))?;
        number_or_null(field(c, "max_abs_residual", &at)?, &at)?;
        number_or_null(field(c, "max_rel_residual", &at)?, &at)?;
        field(c, "tolerance", &at)?.as_f64().ok_or_else(|| format!("{at}.tolerance is not a number"))?;
        let kind = field(c, "tolerance_kind", &at)?.as_str().unwrap_or_default();
        if kind != "relative" && kind != "absolute" {
            return Err(format!("{at}: unknown tolerance kind `{kind}`"));
        }
        field(c, "diagnostics", &at)?.as_object().ok_or_else(|| format!("{at}.diagnostics is not an object"))?;
    }
    Ok(())
}
