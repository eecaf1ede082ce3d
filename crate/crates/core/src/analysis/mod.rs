//! Normalized findings from the built-in analyzer and external scanners.

pub mod adapters;
pub mod builtin;
mod equivalence;
mod metrics;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::ChartRef;
use crate::manifest::{normalize_namespace, ManifestSet, ResourceId};

pub use adapters::{parse_report, run_adapter, ExternalAdapter};
pub use builtin::{run_builtin_analyzer, BuiltinAnalyzer, QuantityCeiling};
pub use equivalence::{EquivalenceMap, BUNDLED_POLICY_MAP};
pub use metrics::{count_misconfigurations, unique_policies, ToolCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tool {
    Builtin,
    Checkov,
    Datree,
    Kics,
    KubeLinter,
    Kubeaudit,
    Kubescape,
    Terrascan,
}

impl Tool {
    pub const ALL: [Tool; 8] = [
        Tool::Builtin,
        Tool::Checkov,
        Tool::Datree,
        Tool::Kics,
        Tool::KubeLinter,
        Tool::Kubeaudit,
        Tool::Kubescape,
        Tool::Terrascan,
    ];

    pub const EXTERNAL: [Tool; 7] = [
        Tool::Checkov,
        Tool::Datree,
        Tool::Kics,
        Tool::KubeLinter,
        Tool::Kubeaudit,
        Tool::Kubescape,
        Tool::Terrascan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tool::Builtin => "builtin",
            Tool::Checkov => "checkov",
            Tool::Datree => "datree",
            Tool::Kics => "kics",
            Tool::KubeLinter => "kube-linter",
            Tool::Kubeaudit => "kubeaudit",
            Tool::Kubescape => "kubescape",
            Tool::Terrascan => "terrascan",
        }
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tool {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tool::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| format!("unknown tool {s:?}"))
    }
}

/// A policy as reported by one tool.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyDescriptor {
    pub tool: Tool,
    pub policy_id: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence_class: Option<String>,
}

/// One violation of one policy on one resource, optionally scoped to a
/// container.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub policy: PolicyDescriptor,
    pub resource: ResourceId,
    pub container: Option<String>,
    pub chart: ChartRef,
    pub severity: String,
}

/// Identity used to decide whether a finding persists after a patch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FindingKey {
    pub tool: Tool,
    pub policy_id: String,
    pub resource: ResourceId,
    pub container: Option<String>,
}

impl Finding {
    pub fn key(&self) -> FindingKey {
        FindingKey {
            tool: self.policy.tool,
            policy_id: self.policy.policy_id.clone(),
            resource: self.resource.clone(),
            container: self.container.clone(),
        }
    }

    pub fn tool(&self) -> Tool {
        self.policy.tool
    }
}

/// Resource identity as a scanner reports it; any field may be missing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceHint {
    pub api_version: Option<String>,
    /// Compared case-insensitively, ignoring `_` and `-`, so `kubernetes_pod`
    /// style types can be matched after prefix stripping.
    pub kind: Option<String>,
    pub name: String,
    pub namespace: Option<String>,
}

fn kind_matches(hint: &str, kind: &str) -> bool {
    let norm = |s: &str| s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>().to_ascii_lowercase();
    norm(hint) == norm(kind)
}

impl ResourceHint {
    /// Finds the unique resource in `set` matching every field the hint
    /// carries.
    pub fn resolve(&self, set: &ManifestSet) -> Result<ResourceId, QuarantineReason> {
        let matches: Vec<_> = set
            .docs
            .iter()
            .filter(|d| d.id.name == self.name)
            .filter(|d| self.kind.as_deref().map_or(true, |k| kind_matches(k, &d.id.kind)))
            .filter(|d| {
                self.namespace
                    .as_deref()
                    .map_or(true, |ns| normalize_namespace(ns) == d.id.namespace)
            })
            .filter(|d| {
                self.api_version
                    .as_deref()
                    .map_or(true, |v| v.is_empty() || v == d.id.api_version)
            })
            .collect();
        match matches.as_slice() {
            [one] => Ok(one.id.clone()),
            [] => Err(QuarantineReason::Unresolved),
            _ => Err(QuarantineReason::Ambiguous),
        }
    }
}

/// A finding as parsed from a tool report, before resource resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFinding {
    pub policy: PolicyDescriptor,
    pub hint: ResourceHint,
    pub container: Option<String>,
    pub severity: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuarantineReason {
    Unresolved,
    Ambiguous,
}

/// A reported finding whose resource could not be pinned to one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedFinding {
    pub policy: PolicyDescriptor,
    pub hint: ResourceHint,
    pub container: Option<String>,
    pub chart: ChartRef,
    pub reason: QuarantineReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanOutput {
    pub findings: Vec<Finding>,
    pub quarantined: Vec<QuarantinedFinding>,
}

impl ScanOutput {
    /// Resolves raw findings against the scanned manifest.
    pub fn resolve(raw: Vec<RawFinding>, set: &ManifestSet, chart: &ChartRef) -> Self {
        let mut out = ScanOutput::default();
        for r in raw {
            match r.hint.resolve(set) {
                Ok(resource) => out.findings.push(Finding {
                    policy: r.policy,
                    resource,
                    container: r.container,
                    chart: chart.clone(),
                    severity: r.severity,
                }),
                Err(reason) => out.quarantined.push(QuarantinedFinding {
                    policy: r.policy,
                    hint: r.hint,
                    container: r.container,
                    chart: chart.clone(),
                    reason,
                }),
            }
        }
        out
    }
}

/// What an analyzer is pointed at.
#[derive(Debug, Clone, Copy)]
pub struct ScanTarget<'a> {
    pub chart: &'a ChartRef,
    pub manifest: &'a ManifestSet,
    /// The manifest text on disk, for external tools.
    pub manifest_path: &'a Path,
    /// Where raw tool reports are kept.
    pub raw_dir: &'a Path,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0} is not installed")]
    ToolUnavailable(Tool),
    #[error("{tool} timed out after {seconds}s")]
    ToolTimeout { tool: Tool, seconds: u64 },
    #[error("{tool} report could not be decoded ({raw_output}): {message}")]
    Decode {
        tool: Tool,
        raw_output: PathBuf,
        message: String,
    },
    #[error("{tool} exited with status {status}: {stderr}")]
    Exec {
        tool: Tool,
        status: String,
        stderr: String,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl AnalysisError {
    /// Unavailable tools are skipped rather than counted as failures.
    pub fn is_skip(&self) -> bool {
        matches!(self, AnalysisError::ToolUnavailable(_))
    }
}

/// Anything that turns a rendered manifest into findings.
pub trait Analyzer: Send + Sync {
    fn tool(&self) -> Tool;

    fn version(&self) -> Result<String, AnalysisError>;

    fn analyze(&self, target: &ScanTarget<'_>) -> Result<ScanOutput, AnalysisError>;
}
