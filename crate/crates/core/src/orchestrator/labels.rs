//! Manual validation labels: an append-only history whose latest entry per
//! (finding, reviewer) is the active label.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rundir::{append_jsonl, read_jsonl};
use super::OrchestratorError;
use crate::remediation::Outcome;
use crate::stats::ValidationCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolVerdict {
    TruePositive,
    FalsePositive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationLabel {
    pub finding_id: String,
    pub reviewer: String,
    pub tool_verdict: ToolVerdict,
    #[serde(default)]
    pub refactor_verdict: Option<Outcome>,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub timestamp: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("unknown finding id {0}")]
    UnknownFinding(String),
    #[error("finding {0} is not in the validation sample; only sampled findings can be labeled")]
    NotSampled(String),
    #[error("reviewer id must not be empty")]
    EmptyReviewer,
}

/// `labels.jsonl` plus the ids it may refer to.
#[derive(Debug)]
pub struct LabelStore {
    path: PathBuf,
    known: BTreeSet<String>,
    sampled: BTreeSet<String>,
}

impl LabelStore {
    pub fn new(path: impl Into<PathBuf>, known: BTreeSet<String>, sampled: BTreeSet<String>) -> Self {
        Self {
            path: path.into(),
            known,
            sampled,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn sampled(&self) -> &BTreeSet<String> {
        &self.sampled
    }

    pub fn check(&self, label: &ValidationLabel) -> Result<(), LabelError> {
        if label.reviewer.trim().is_empty() {
            return Err(LabelError::EmptyReviewer);
        }
        if !self.known.contains(&label.finding_id) {
            return Err(LabelError::UnknownFinding(label.finding_id.clone()));
        }
        if !self.sampled.contains(&label.finding_id) {
            return Err(LabelError::NotSampled(label.finding_id.clone()));
        }
        Ok(())
    }

    /// Validates and appends. A missing timestamp is filled in.
    pub fn record(&self, mut label: ValidationLabel) -> Result<ValidationLabel, OrchestratorError> {
        self.check(&label)?;
        if label.timestamp.is_empty() {
            label.timestamp = chrono::Utc::now().to_rfc3339();
        }
        append_jsonl(&self.path, &label)?;
        Ok(label)
    }

    pub fn history(&self) -> Result<Vec<ValidationLabel>, OrchestratorError> {
        read_jsonl(&self.path)
    }

    pub fn active(&self) -> Result<Vec<ValidationLabel>, OrchestratorError> {
        Ok(active_labels(&self.history()?))
    }

    pub fn counts(&self) -> Result<ValidationCounts, OrchestratorError> {
        Ok(validation_counts(&self.active()?, self.sampled.len()))
    }
}

/// Latest label per (finding, reviewer), ordered by that key.
pub fn active_labels(history: &[ValidationLabel]) -> Vec<ValidationLabel> {
    let mut latest: BTreeMap<(&str, &str), &ValidationLabel> = BTreeMap::new();
    for l in history {
        latest.insert((&l.finding_id, &l.reviewer), l);
    }
    latest.into_values().cloned().collect()
}

pub fn validation_counts(active: &[ValidationLabel], sampled: usize) -> ValidationCounts {
    let mut c = ValidationCounts {
        sampled: sampled as u64,
        labeled_findings: active.iter().map(|l| &l.finding_id).collect::<BTreeSet<_>>().len() as u64,
        ..Default::default()
    };
    for l in active {
        match l.tool_verdict {
            ToolVerdict::TruePositive => c.true_positive += 1,
            ToolVerdict::FalsePositive => c.false_positive += 1,
        }
        match l.refactor_verdict {
            Some(Outcome::Correct) => c.refactor_correct += 1,
            Some(Outcome::Wrong) => c.refactor_wrong += 1,
            Some(Outcome::Refused) => c.refactor_refused += 1,
            None => {}
        }
    }
    c
}
