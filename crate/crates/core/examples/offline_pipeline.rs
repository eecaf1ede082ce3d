//! Runs every stage against the bundled local hub and prints the report.
//!
//! cargo run --example offline_pipeline -- [run-dir]

use chart_sentry::analysis::Tool;
use chart_sentry::orchestrator::{pipeline_run, RunConfig};

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let run_dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("chart-sentry-offline"));
    let config = RunConfig {
        run_dir: run_dir.clone(),
        hub_url: concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/hub").into(),
        offline: true,
        tools: vec![Tool::Builtin],
        provider: "mock".into(),
        sample_size: 10,
        seed: 7,
        ..RunConfig::default()
    };
    let summary = pipeline_run(&config)?;
    eprintln!("executed {:?}, already done {:?}", summary.executed, summary.skipped);
    print!("{}", std::fs::read_to_string(run_dir.join("report.md"))?);
    Ok(())
}
