use serde::Deserialize;

use super::descriptor;
use crate::analysis::{RawFinding, ResourceHint, Tool};

#[derive(Debug, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct AuditLine {
    audit_result_name: String,
    resource_kind: String,
    resource_name: String,
    #[serde(default)]
    resource_namespace: String,
    #[serde(default)]
    resource_api_version: String,
    #[serde(default)]
    container: Option<String>,
    #[serde(rename = "level")]
    level: String,
    #[serde(rename = "msg", default)]
    msg: String,
}

/// One JSON object per line. `info` results are not violations.
pub(super) fn parse(report: &str) -> Result<Vec<RawFinding>, String> {
    let mut out = Vec::new();
    for (i, line) in report.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: AuditLine = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        if entry.level == "info" {
            continue;
        }
        out.push(RawFinding {
            policy: descriptor(Tool::Kubeaudit, &entry.audit_result_name, &entry.msg),
            hint: ResourceHint {
                api_version: Some(entry.resource_api_version),
                kind: Some(entry.resource_kind),
                name: entry.resource_name,
                namespace: Some(entry.resource_namespace),
            },
            container: entry.container.filter(|c| !c.is_empty()),
            severity: entry.level,
        });
    }
    Ok(out)
}
