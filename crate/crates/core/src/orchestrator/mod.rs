//! Pipeline sequencing over a run directory, manual labels and the review
//! service.

mod labels;
mod pipeline;
mod review;
mod rundir;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisError, Tool};
use crate::catalog::{CatalogError, ChartSource, HubClient, LocalHub, DEFAULT_HUB_URL};
use crate::manifest::ManifestError;
use crate::remediation::{ProviderError, RemediationError};
use crate::stats::StatsError;

pub use labels::{active_labels, validation_counts, LabelError, LabelStore, ToolVerdict, ValidationLabel};
pub use pipeline::{
    finding_id, label_store, load_findings, pipeline_run, record_label, run_stage, FindingRecord, RunSummary, ScanRecord,
    ScanStatus, ValidationSample, VerificationRecord,
};
pub use review::{review_router, serve_review, ReviewOptions};
pub use rundir::{RunDir, RunLock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Mine,
    Render,
    Scan,
    Remediate,
    Verify,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Mine,
        Stage::Render,
        Stage::Scan,
        Stage::Remediate,
        Stage::Verify,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Mine => "mine",
            Stage::Render => "render",
            Stage::Scan => "scan",
            Stage::Remediate => "remediate",
            Stage::Verify => "verify",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("run directory is locked by another process ({0}); remove the file if that process is gone")]
    Locked(PathBuf),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is corrupt: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Remediation(#[from] RemediationError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Label(#[from] LabelError),
}

/// Settings of one run. Persisted as `config.json` in the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(skip)]
    pub run_dir: PathBuf,
    /// Defaults to `<run_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    /// An http(s) hub API, or a local hub directory (`file://` or a path).
    pub hub_url: String,
    pub offline: bool,
    pub max_charts: Option<usize>,
    pub tools: Vec<Tool>,
    pub tool_timeout_secs: u64,
    pub helm: PathBuf,
    pub provider: String,
    pub provider_config: Option<PathBuf>,
    pub skip_llm: bool,
    pub llm_retries: u32,
    pub confidence: f64,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run_dir: PathBuf::from("run"),
            cache_dir: None,
            hub_url: DEFAULT_HUB_URL.to_string(),
            offline: false,
            max_charts: None,
            tools: Tool::ALL.to_vec(),
            tool_timeout_secs: 600,
            helm: PathBuf::from("helm"),
            provider: "mock".into(),
            provider_config: None,
            skip_llm: false,
            llm_retries: 3,
            confidence: 0.95,
            sample_size: 50,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.run_dir.join("cache"))
    }

    /// Tools in canonical order, without repeats.
    pub fn selected_tools(&self) -> Vec<Tool> {
        Tool::ALL.into_iter().filter(|t| self.tools.contains(t)).collect()
    }

    fn local_hub_dir(&self) -> Option<PathBuf> {
        if let Some(path) = self.hub_url.strip_prefix("file://") {
            return Some(PathBuf::from(path));
        }
        let looks_remote = self.hub_url.starts_with("http://") || self.hub_url.starts_with("https://");
        (!looks_remote).then(|| PathBuf::from(&self.hub_url))
    }

    pub fn chart_source(&self) -> Result<Box<dyn ChartSource>, OrchestratorError> {
        match self.local_hub_dir() {
            Some(dir) if dir.is_dir() => Ok(Box::new(LocalHub::new(dir))),
            Some(dir) => Err(OrchestratorError::Config(format!("hub directory {} does not exist", dir.display()))),
            None if self.offline => Err(OrchestratorError::Config(
                "offline runs need a local hub directory as --hub-url".into(),
            )),
            None => Ok(Box::new(HubClient::new(self.hub_url.clone()))),
        }
    }

    pub fn z(&self) -> Result<f64, OrchestratorError> {
        Ok(crate::stats::z_for_confidence(self.confidence)?)
    }

    /// The earliest stage whose output depends on a field that differs.
    pub fn invalidated_from(&self, old: &RunConfig) -> Option<Stage> {
        let differs = |f: &dyn Fn(&RunConfig) -> String| f(self) != f(old);
        if differs(&|c| format!("{:?}{}{:?}", c.hub_url, c.offline, c.max_charts)) {
            Some(Stage::Mine)
        } else if differs(&|c| format!("{:?}", c.helm)) {
            Some(Stage::Render)
        } else if differs(&|c| format!("{:?}{}{}{}", c.selected_tools(), c.tool_timeout_secs, c.sample_size, c.seed)) {
            Some(Stage::Scan)
        } else if differs(&|c| format!("{}{:?}{}{}", c.provider, c.provider_config, c.skip_llm, c.llm_retries)) {
            Some(Stage::Remediate)
        } else if differs(&|c| c.confidence.to_string()) {
            Some(Stage::Report)
        } else {
            None
        }
    }

    /// Loads the persisted config of `run_dir`, if any.
    pub fn load(run_dir: &Path) -> Result<Option<RunConfig>, OrchestratorError> {
        let path = run_dir.join(rundir::CONFIG);
        if !path.is_file() {
            return Ok(None);
        }
        let mut config: RunConfig = rundir::read_json(&path)?;
        config.run_dir = run_dir.to_path_buf();
        Ok(Some(config))
    }
}
