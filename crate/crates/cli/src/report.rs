use std::collections::BTreeMap;

use rfs_core::checks::CheckOutcome;
use rfs_core::{BitString, OracleKey, QueryLedger};
use serde::Serialize;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: Option<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

impl From<CheckOutcome> for Verdict {
    fn from(c: CheckOutcome) -> Self {
        Self {
            name: format!("{} ({} cases)", c.name, c.cases),
            pass: c.passed,
            detail: c.detail,
        }
    }
}

/// One solver run on one `x_1`.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub track: String,
    pub x1: BitString,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_probability: Option<f64>,
    pub ledger: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub expected_counts: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discard_error: Option<String>,
    pub verdicts: Vec<Verdict>,
}

pub fn ledger_map(ledger: &QueryLedger) -> BTreeMap<String, u64> {
    ledger
        .snapshot()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

pub fn counts_map(expected: &[(OracleKey, u64)]) -> BTreeMap<String, u64> {
    expected.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Top-level document printed by every command.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub format_version: u32,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunReport>,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
    pub duration_ms: u128,
}

impl Report {
    pub fn new(command: &str, digest: Option<String>) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            command: command.into(),
            instance_digest: digest,
            ablation: None,
            runs: Vec::new(),
            verdicts: Vec::new(),
            passed: true,
            duration_ms: 0,
        }
    }

    /// Sets `passed` from every verdict, including those of the runs.
    pub fn finish(&mut self, started: std::time::Instant) {
        self.passed = self
            .verdicts
            .iter()
            .chain(self.runs.iter().flat_map(|r| &r.verdicts))
            .all(|v| v.pass);
        self.duration_ms = started.elapsed().as_millis();
    }

    pub fn first_failure(&self) -> Option<&Verdict> {
        self.verdicts
            .iter()
            .chain(self.runs.iter().flat_map(|r| &r.verdicts))
            .find(|v| !v.pass)
    }
}
