//! Draws a seeded validation sample stratified by tool.
//!
//! cargo run --example validation_sample -- <run-dir> [size] [seed]

use chart_sentry::orchestrator::load_findings;
use chart_sentry::stats::stratified_sample;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let run_dir = args.first().ok_or_else(|| anyhow::anyhow!("usage: validation_sample <run-dir> [size] [seed]"))?;
    let findings = load_findings(run_dir.as_ref())?;
    let size = args.get(1).map_or(Ok(10), |s| s.parse())?.min(findings.len());
    let seed = args.get(2).map_or(Ok(0), |s| s.parse())?;
    for i in stratified_sample(&findings, size, seed, |(r, _)| r.tool)? {
        let (r, _) = &findings[i];
        println!("{} {:<10} {:<16} {}/{}", r.id, r.tool, r.policy_id, r.kind, r.name);
    }
    Ok(())
}
