//! One remediation attempt per finding: prompt, query, extract, splice,
//! re-scan and classify.

mod extract;
mod prompt;
pub mod provider;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisError, Analyzer, Finding, FindingKey, ScanTarget};
use crate::manifest::{diff_resource, locate_resource, splice_resource, ManifestError, ManifestSet, SnippetDiff};

pub use extract::extract_refactored;
pub use prompt::{build_prompt, directive_phrase, prompt_snippet, Prompt};
pub use provider::{query_provider, AuditLog, MockMode, MockProvider, Provider, ProviderError, QueryParams, RetryPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    Wrong,
    Refused,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Correct, Outcome::Wrong, Outcome::Refused];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Correct => "correct",
            Outcome::Wrong => "wrong",
            Outcome::Refused => "refused",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureDetail {
    UnparseableOutput,
    IdentityChanged,
    ProviderError,
}

/// The outcome rule. `None` means the attempt is excluded from the outcome
/// proportions (the provider never answered).
pub fn classify(failure: Option<FailureDetail>, diff_is_empty: bool, finding_persists: bool) -> Option<Outcome> {
    match failure {
        Some(FailureDetail::ProviderError) => None,
        Some(FailureDetail::UnparseableOutput | FailureDetail::IdentityChanged) => Some(Outcome::Wrong),
        None if diff_is_empty => Some(Outcome::Refused),
        None if finding_persists => Some(Outcome::Wrong),
        None => Some(Outcome::Correct),
    }
}

pub fn finding_persists(key: &FindingKey, rescan: &[Finding]) -> bool {
    rescan.iter().any(|f| &f.key() == key)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemediationAttempt {
    pub finding_id: String,
    pub prompt: Prompt,
    pub provider_id: String,
    pub model: String,
    /// Absent only when the provider never answered.
    pub raw_response: Option<String>,
    pub extracted: Option<String>,
    pub diff: SnippetDiff,
    /// Findings of the originating tool on the patched resource.
    pub post_findings: Vec<Finding>,
    /// Post findings that were not present before the patch.
    pub regression_findings: Vec<Finding>,
    pub outcome: Option<Outcome>,
    pub failure_detail: Option<FailureDetail>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timestamp: String,
}

#[derive(Debug, Error)]
pub enum RemediationError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("re-scan failed: {0}")]
    Rescan(#[from] AnalysisError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything one attempt needs besides the provider.
pub struct AttemptInput<'a> {
    pub finding_id: &'a str,
    pub finding: &'a Finding,
    /// The chart's manifest with earlier successful patches applied.
    pub current: &'a ManifestSet,
    /// Findings of the originating tool on `current`.
    pub baseline: &'a [Finding],
    /// Analyzer of the tool that reported the finding.
    pub analyzer: &'a dyn Analyzer,
    /// Scratch directory for the patched manifest and raw reports.
    pub work_dir: &'a Path,
    /// Canonical key handed to the provider as a hint.
    pub policy_key: Option<String>,
}

pub struct Remediator<'a> {
    pub provider: &'a dyn Provider,
    pub params: QueryParams,
    pub retry: RetryPolicy,
    pub audit: Option<&'a AuditLog>,
}

impl<'a> Remediator<'a> {
    pub fn new(provider: &'a dyn Provider) -> Self {
        Self {
            provider,
            params: QueryParams::default(),
            retry: RetryPolicy::default(),
            audit: None,
        }
    }

    /// Runs one attempt. On `Correct` the patched manifest is returned so
    /// later findings on the same chart build on it.
    pub fn attempt(&self, input: &AttemptInput<'_>) -> Result<(RemediationAttempt, Option<ManifestSet>), RemediationError> {
        let original = locate_resource(input.current, &input.finding.resource)?;
        let prompt = build_prompt(input.finding, original);
        let mut attempt = RemediationAttempt {
            finding_id: input.finding_id.to_string(),
            prompt,
            provider_id: self.provider.id().to_string(),
            model: self.provider.model().to_string(),
            raw_response: None,
            extracted: None,
            diff: SnippetDiff {
                is_empty: true,
                unified_text: String::new(),
            },
            post_findings: Vec::new(),
            regression_findings: Vec::new(),
            outcome: None,
            failure_detail: None,
            error: None,
            timestamp: chrono::Utc::now().to_rfc3339(),
        };

        let params = QueryParams {
            policy_key: input.policy_key.clone(),
            ..self.params.clone()
        };
        let raw = match query_provider(self.provider, &attempt.prompt.text, &params, self.retry, self.audit) {
            Ok(raw) => raw,
            Err(e) if e.is_fatal() => return Err(e.into()),
            Err(e) => {
                attempt.failure_detail = Some(FailureDetail::ProviderError);
                attempt.error = Some(e.to_string());
                return Ok((attempt, None));
            }
        };
        attempt.raw_response = Some(raw.clone());

        let refactored = match extract_refactored(&raw, original) {
            Ok(doc) => doc,
            Err(detail) => {
                attempt.failure_detail = Some(detail);
                attempt.outcome = classify(Some(detail), true, false);
                return Ok((attempt, None));
            }
        };
        attempt.extracted = Some(refactored.raw_text.clone());
        attempt.diff = diff_resource(original, &refactored);
        if attempt.diff.is_empty {
            attempt.outcome = classify(None, true, false);
            return Ok((attempt, None));
        }

        let patched = match splice_resource(input.current, &input.finding.resource, &refactored) {
            Ok(set) => set,
            Err(e) => {
                attempt.failure_detail = Some(FailureDetail::UnparseableOutput);
                attempt.error = Some(e.to_string());
                attempt.outcome = classify(attempt.failure_detail, false, false);
                return Ok((attempt, None));
            }
        };

        std::fs::create_dir_all(input.work_dir)?;
        let manifest_path = input.work_dir.join("manifest.yaml");
        std::fs::write(&manifest_path, patched.source_text())?;
        let output = input.analyzer.analyze(&ScanTarget {
            chart: &input.finding.chart,
            manifest: &patched,
            manifest_path: &manifest_path,
            raw_dir: &input.work_dir.join("raw"),
        })?;
        let resource = &input.finding.resource;
        let before: Vec<FindingKey> = input
            .baseline
            .iter()
            .filter(|f| &f.resource == resource)
            .map(Finding::key)
            .collect();
        attempt.post_findings = output
            .findings
            .into_iter()
            .filter(|f| &f.resource == resource)
            .collect();
        attempt.regression_findings = attempt
            .post_findings
            .iter()
            .filter(|f| !before.contains(&f.key()))
            .cloned()
            .collect();
        let persists = finding_persists(&input.finding.key(), &attempt.post_findings);
        attempt.outcome = classify(None, false, persists);
        let next = (attempt.outcome == Some(Outcome::Correct)).then_some(patched);
        Ok((attempt, next))
    }
}
