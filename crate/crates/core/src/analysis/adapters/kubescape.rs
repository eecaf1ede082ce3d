use std::collections::HashMap;

use serde::Deserialize;

use super::{decode, descriptor};
use crate::analysis::{RawFinding, ResourceHint, Tool};

#[derive(Debug, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
struct Report {
    #[serde(default)]
    summary_details: Option<Summary>,
    #[serde(default)]
    results: Option<Vec<ResourceResult>>,
}

#[derive(Debug, Deserialize, Default)]
struct Summary {
    #[serde(default)]
    controls: HashMap<String, ControlSummary>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ControlSummary {
    #[serde(default)]
    score_factor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ResourceResult {
    #[serde(rename = "resourceID")]
    resource_id: String,
    #[serde(default)]
    controls: Vec<ControlResult>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ControlResult {
    #[serde(rename = "controlID")]
    control_id: String,
    name: String,
    status: Status,
}

#[derive(Debug, Deserialize)]
struct Status {
    status: String,
}

/// `<group>/<version>/<namespace>/<kind>/<name>`; the core group is empty.
fn hint(resource_id: &str) -> Result<ResourceHint, String> {
    let mut parts = resource_id.rsplitn(4, '/');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(name), Some(kind), Some(ns), Some(api)) if !name.is_empty() && !kind.is_empty() => Ok(ResourceHint {
            api_version: Some(api.trim_start_matches('/').to_string()),
            kind: Some(kind.to_string()),
            name: name.to_string(),
            namespace: Some(ns.to_string()),
        }),
        _ => Err(format!("unrecognized kubescape resourceID {resource_id:?}")),
    }
}

pub(super) fn parse(report: &str) -> Result<Vec<RawFinding>, String> {
    let report: Report = decode(report)?;
    let summary = report.summary_details.unwrap_or_default();
    let mut out = Vec::new();
    for res in report.results.unwrap_or_default() {
        let failed: Vec<_> = res.controls.iter().filter(|c| c.status.status == "failed").collect();
        if failed.is_empty() {
            continue;
        }
        let hint = hint(&res.resource_id)?;
        for c in failed {
            let severity = summary
                .controls
                .get(&c.control_id)
                .and_then(|s| s.score_factor)
                .map(|s| s.to_string())
                .unwrap_or_default();
            out.push(RawFinding {
                policy: descriptor(Tool::Kubescape, &c.control_id, &c.name),
                hint: hint.clone(),
                container: None,
                severity,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resource_ids() {
        let h = hint("/v1/busybox-namespace/Pod/busybox-pod").unwrap();
        assert_eq!(h.api_version.as_deref(), Some("v1"));
        assert_eq!(h.namespace.as_deref(), Some("busybox-namespace"));
        let h = hint("rbac.authorization.k8s.io/v1//ClusterRole/admin").unwrap();
        assert_eq!(h.api_version.as_deref(), Some("rbac.authorization.k8s.io/v1"));
        assert_eq!(h.namespace.as_deref(), Some(""));
        assert_eq!(h.kind.as_deref(), Some("ClusterRole"));
        assert!(hint("Pod/x").is_err());
    }
}
