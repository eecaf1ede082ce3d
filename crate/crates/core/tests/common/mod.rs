#![allow(dead_code)]

use std::path::{Path, PathBuf};

use chart_sentry::analysis::Tool;
use chart_sentry::orchestrator::RunConfig;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

/// The bundled offline run: five hub charts, built-in analyzer, mock fixes.
pub fn golden_config(run_dir: &Path) -> RunConfig {
    RunConfig {
        run_dir: run_dir.to_path_buf(),
        hub_url: fixture("hub").display().to_string(),
        offline: true,
        tools: vec![Tool::Builtin],
        provider: "mock".into(),
        sample_size: 10,
        seed: 7,
        ..RunConfig::default()
    }
}

pub const GOLDEN_REPORT: &str = "golden/report.json";
