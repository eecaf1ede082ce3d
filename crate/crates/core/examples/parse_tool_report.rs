//! Decodes a native report of an external scanner and resolves its findings
//! against the manifest that was scanned.
//!
//! cargo run --example parse_tool_report -- kube-linter report.json manifest.yaml

use chart_sentry::analysis::{parse_report, EquivalenceMap, ScanOutput, Tool};
use chart_sentry::catalog::ChartRef;
use chart_sentry::manifest::parse_manifests;

fn main() -> anyhow::Result<()> {
    let goldens = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/goldens");
    let args: Vec<String> = std::env::args().skip(1).collect();
    let tool: Tool = args.first().map_or("checkov", String::as_str).parse().map_err(anyhow::Error::msg)?;
    let report = args.get(1).cloned().unwrap_or_else(|| format!("{goldens}/{tool}.json"));
    let manifest = args.get(2).cloned().unwrap_or_else(|| format!("{goldens}/manifest.yaml"));

    let raw = parse_report(tool, &std::fs::read_to_string(&report)?).map_err(anyhow::Error::msg)?;
    let set = parse_manifests(&std::fs::read_to_string(&manifest)?);
    let mut out = ScanOutput::resolve(raw, &set, &ChartRef::default());
    EquivalenceMap::bundled().annotate(&mut out.findings);
    for f in &out.findings {
        let key = f.policy.equivalence_class.as_deref().unwrap_or("-");
        println!("{:<40} {:<28} {}/{}", f.policy.policy_id, key, f.resource.kind, f.resource.name);
    }
    for q in &out.quarantined {
        println!("quarantined ({:?}): {} on {:?}", q.reason, q.policy.policy_id, q.hint);
    }
    Ok(())
}
