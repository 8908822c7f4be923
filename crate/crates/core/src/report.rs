//! Serializable run reports.
//!
//! One [`RunReport`] per (prompt, repetition). Timing lives under its own
//! key so consumers comparing reports for reproducibility can strip it in
//! one place; everything else is a pure function of the experiment spec.

use serde::{Deserialize, Serialize};

use crate::search::SearchCounters;

/// Schema version stamped into every report document.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OutputReport {
    pub text: String,
    pub tokens: Vec<String>,
    pub cum_loglik: f64,
    /// Similarity the sequence carried at its final validation (0 when
    /// unguarded).
    pub final_validation_score: f64,
    /// Max similarity to the full store, independent of the sampling ratio.
    pub violation_score: f64,
    /// None with a note when the model assigns the output probability 0.
    pub ppl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppl_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lcs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lcs_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lcs_substring: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
pub struct CountersReport {
    pub steps_validated: usize,
    pub validations: usize,
    pub rollbacks: usize,
}

impl From<SearchCounters> for CountersReport {
    fn from(c: SearchCounters) -> Self {
        Self {
            steps_validated: c.steps_validated,
            validations: c.validations,
            rollbacks: c.rollbacks,
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum RunStatus {
    Ok,
    SafetyExhausted,
    RollbackExhausted,
    Failed(String),
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }
}

/// Wall-clock measurements, kept separate from the deterministic payload.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
pub struct Timing {
    pub wall_ms: f64,
}

/// Full record of one decoding run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub schema: u32,
    pub prompt_id: String,
    pub rep: usize,
    pub seed: u64,
    pub guarded: bool,
    pub status: RunStatus,
    pub outputs: Vec<OutputReport>,
    pub counters: CountersReport,
    pub timing: Timing,
}

impl RunReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}
