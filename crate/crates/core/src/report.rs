//! Machine-readable check reports.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `measured < threshold`
    Below,
    /// `measured >= threshold`
    AtLeast,
    /// `measured == threshold`
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// `None` when the quantity could not be computed.
    pub measured: Option<f64>,
    pub threshold: f64,
    pub relation: Relation,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let rel = match self.relation {
            Relation::Below => "<",
            Relation::AtLeast => ">=",
            Relation::Equal => "==",
        };
        match self.measured {
            Some(m) => write!(f, "{status}  {}  {m:.3e} {rel} {:.1e}", self.name, self.threshold)?,
            None => write!(f, "{status}  {}  (not computed)", self.name)?,
        }
        if let Some(d) = &self.detail {
            write!(f, "  [{d}]")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Echo of the scenarios that produced the checks.
    #[serde(default)]
    pub scenarios: Vec<serde_json::Value>,
    /// Random seeds used, by purpose.
    #[serde(default)]
    pub seeds: Vec<(String, u64)>,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub artifacts: Vec<String>,
    pub passed: bool,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            scenarios: Vec::new(),
            seeds: Vec::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
            passed: true,
        }
    }

    fn push(&mut self, check: Check) {
        assert!(
            self.checks.iter().all(|c| c.name != check.name),
            "check '{}' recorded twice",
            check.name
        );
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn below(&mut self, name: impl Into<String>, measured: f64, threshold: f64) -> bool {
        let passed = measured < threshold;
        self.push(Check {
            name: name.into(),
            measured: Some(measured),
            threshold,
            relation: Relation::Below,
            passed,
            detail: None,
        });
        passed
    }

    pub fn at_least(&mut self, name: impl Into<String>, measured: f64, threshold: f64) -> bool {
        let passed = measured >= threshold;
        self.push(Check {
            name: name.into(),
            measured: Some(measured),
            threshold,
            relation: Relation::AtLeast,
            passed,
            detail: None,
        });
        passed
    }

    pub fn equal(&mut self, name: impl Into<String>, measured: f64, expected: f64) -> bool {
        let passed = measured == expected;
        self.push(Check {
            name: name.into(),
            measured: Some(measured),
            threshold: expected,
            relation: Relation::Equal,
            passed,
            detail: None,
        });
        passed
    }

    /// Attaches a note to the most recent check.
    pub fn note(&mut self, detail: impl Into<String>) {
        if let Some(c) = self.checks.last_mut() {
            c.detail = Some(detail.into());
        }
    }

    /// Records a check whose quantity could not be computed.
    pub fn failed(&mut self, name: impl Into<String>, threshold: f64, relation: Relation, reason: &Error) {
        self.push(Check {
            name: name.into(),
            measured: None,
            threshold,
            relation,
            passed: false,
            detail: Some(reason.to_string()),
        });
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Concatenates reports. Check names must stay unique.
    pub fn merge(reports: &[Report]) -> Result<Self> {
        let mut out = Report::new("report-merge");
        let mut seen = BTreeSet::new();
        for r in reports {
            out.scenarios.extend(r.scenarios.iter().cloned());
            out.seeds.extend(r.seeds.iter().cloned());
            out.artifacts.extend(r.artifacts.iter().cloned());
            for c in &r.checks {
                if !seen.insert(c.name.clone()) {
                    return Err(Error::SeriesMismatch(format!(
                        "check '{}' appears in more than one report",
                        c.name
                    )));
                }
                out.push(c.clone());
            }
        }
        Ok(out)
    }

    /// Appends another report's checks under its own names.
    pub fn absorb(&mut self, other: Report) {
        self.scenarios.extend(other.scenarios);
        self.seeds.extend(other.seeds);
        self.artifacts.extend(other.artifacts);
        for c in other.checks {
            self.push(c);
        }
    }
}
