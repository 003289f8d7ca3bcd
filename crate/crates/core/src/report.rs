//! Check records and their JSON / CSV serialization.
//!
//! Residuals and tolerances are written in scientific notation with six
//! significant digits so that reports diff cleanly between runs.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Report schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance tiers.
pub mod tolerance {
    /// Exact rational algebra.
    pub const EXACT: f64 = 1e-12;
    /// Eigenvalue and frame-change computations.
    pub const SPECTRAL: f64 = 1e-10;
    /// One level of 4th-order differencing.
    pub const FD_FIRST: f64 = 1e-5;
    /// Two levels of differencing.
    pub const FD_SECOND: f64 = 1e-4;
    /// Nested differencing of second derivatives.
    pub const FD_NESTED: f64 = 1e-3;
    /// Invariance of a nested-difference field.
    pub const INVARIANT: f64 = 1e-8;
    /// Flat-space Weitzenböck check on polynomial fields.
    pub const FLAT: f64 = 1e-6;
}

/// Six significant digits, `null` for non-finite values.
fn scientific<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        let raw = RawValue::from_string(format!("{v:.5e}")).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub anchor: String,
    #[serde(serialize_with = "scientific")]
    pub max_residual: f64,
    #[serde(serialize_with = "scientific")]
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// `pass` is `residual <= tolerance`; NaN never passes.
    pub fn new(
        name: impl Into<String>,
        anchor: impl Into<String>,
        residual: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            max_residual: residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SkippedCheck {
    pub name: String,
    pub anchor: String,
    pub reason: String,
}

/// An ordered collection of check records.
#[derive(Debug, Clone, Default)]
pub struct Findings {
    pub checks: Vec<CheckRecord>,
    pub skipped: Vec<SkippedCheck>,
}

impl Findings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        name: impl Into<String>,
        anchor: impl Into<String>,
        residual: f64,
        tolerance: f64,
    ) {
        self.checks
            .push(CheckRecord::new(name, anchor, residual, tolerance));
    }

    pub fn skip(
        &mut self,
        name: impl Into<String>,
        anchor: impl Into<String>,
        reason: impl Into<String>,
    ) {
        self.skipped.push(SkippedCheck {
            name: name.into(),
            anchor: anchor.into(),
            reason: reason.into(),
        });
    }

    pub fn extend(&mut self, other: Findings) {
        self.checks.extend(other.checks);
        self.skipped.extend(other.skipped);
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Parameters echoed into every report.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConfigEcho {
    pub m: Option<usize>,
    pub p: Option<usize>,
    #[serde(serialize_with = "scientific")]
    pub h: f64,
    pub order: u8,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub schema: u32,
    pub suite: String,
    pub config: ConfigEcho,
    pub pass: bool,
    pub checks: Vec<CheckRecord>,
    pub skipped: Vec<SkippedCheck>,
    pub wall_time_s: f64,
}

impl SuiteReport {
    pub fn new(
        suite: impl Into<String>,
        config: ConfigEcho,
        findings: Findings,
        wall_time_s: f64,
    ) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            suite: suite.into(),
            config,
            pass: findings.all_pass(),
            checks: findings.checks,
            skipped: findings.skipped,
            wall_time_s,
        }
    }

    pub fn failing(&self) -> Vec<&CheckRecord> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per check: `name,anchor,residual,tol,pass`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "anchor", "residual", "tol", "pass"])
            .expect("in-memory write");
        for c in &self.checks {
            w.write_record([
                c.name.as_str(),
                c.anchor.as_str(),
                &format!("{:.5e}", c.max_residual),
                &format!("{:.5e}", c.tolerance),
                if c.pass { "true" } else { "false" },
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}
