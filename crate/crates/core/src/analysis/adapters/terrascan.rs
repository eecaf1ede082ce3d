use serde::Deserialize;

use super::{decode, descriptor};
use crate::analysis::{RawFinding, ResourceHint, Tool};

#[derive(Debug, Deserialize, Default)]
struct Report {
    #[serde(default)]
    results: Option<Results>,
}

#[derive(Debug, Deserialize, Default)]
struct Results {
    #[serde(default)]
    violations: Option<Vec<Violation>>,
}

#[derive(Debug, Deserialize)]
struct Violation {
    rule_id: String,
    description: String,
    #[serde(default)]
    severity: String,
    resource_name: String,
    resource_type: String,
}

pub(super) fn parse(report: &str) -> Result<Vec<RawFinding>, String> {
    let report: Report = decode(report)?;
    let violations = report.results.unwrap_or_default().violations.unwrap_or_default();
    Ok(violations
        .into_iter()
        .map(|v| {
            let kind = v
                .resource_type
                .strip_prefix("kubernetes_")
                .unwrap_or(&v.resource_type)
                .to_string();
            RawFinding {
                policy: descriptor(Tool::Terrascan, &v.rule_id, &v.description),
                hint: ResourceHint {
                    kind: Some(kind),
                    name: v.resource_name,
                    ..Default::default()
                },
                container: None,
                severity: v.severity,
            }
        })
        .collect())
}
