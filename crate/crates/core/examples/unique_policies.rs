//! Counts findings per tool and the canonical policies only one tool
//! reports, across the bundled sample reports of all seven scanners.

use chart_sentry::analysis::{count_misconfigurations, parse_report, unique_policies, EquivalenceMap, ScanOutput, Tool};
use chart_sentry::catalog::ChartRef;
use chart_sentry::manifest::parse_manifests;

fn main() -> anyhow::Result<()> {
    let goldens = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/goldens");
    let set = parse_manifests(&std::fs::read_to_string(format!("{goldens}/manifest.yaml"))?);
    let mut findings = Vec::new();
    for tool in Tool::EXTERNAL {
        let raw = parse_report(tool, &std::fs::read_to_string(format!("{goldens}/{tool}.json"))?).map_err(anyhow::Error::msg)?;
        findings.extend(ScanOutput::resolve(raw, &set, &ChartRef::default()).findings);
    }
    let map = EquivalenceMap::bundled();
    let counts = count_misconfigurations(&findings);
    for (tool, unique) in unique_policies(&findings, &map) {
        println!("{:<12} N_MISC {:>3}  U_POL {:>2}  {:?}", tool.to_string(), counts[&tool].total, unique.len(), unique);
    }
    Ok(())
}
