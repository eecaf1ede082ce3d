//! Runs the built-in analyzer over a rendered manifest.
//!
//! cargo run --example scan_manifest -- [manifest.yaml]

use chart_sentry::analysis::run_builtin_analyzer;
use chart_sentry::catalog::ChartRef;
use chart_sentry::manifest::parse_manifests;

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/listing1_pod.yaml").into());
    let set = parse_manifests(&std::fs::read_to_string(&path)?);
    for e in &set.errors {
        eprintln!("skipped document at bytes {}..{}: {}", e.span.start, e.span.end, e.message);
    }
    for f in run_builtin_analyzer(&set, &ChartRef::default()) {
        let r = &f.resource;
        let container = f.container.as_deref().map(|c| format!(" [{c}]")).unwrap_or_default();
        println!("{:<16} {:<7} {}/{}/{}{container}", f.policy.policy_id, f.severity, r.kind, r.namespace, r.name);
    }
    Ok(())
}
