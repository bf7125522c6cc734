//! Machine-readable record of one topology run. Contains no wall-clock data,
//! so two runs of the same spec produce byte-identical transcripts.

use serde::{Deserialize, Serialize};

use crate::topology::Event;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub event: Event,
    pub outcome: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub step: u64,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptReport {
    pub steps: Vec<StepRecord>,
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
}

impl TranscriptReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }
}
