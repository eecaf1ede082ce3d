use std::collections::HashMap;

use serde::Deserialize;

use super::{decode, descriptor};
use crate::analysis::{RawFinding, ResourceHint, Tool};

#[derive(Debug, Deserialize, Default)]
#[serde(rename_all = "PascalCase")]
struct Report {
    #[serde(default)]
    checks: Vec<Check>,
    #[serde(default)]
    reports: Option<Vec<Diagnostic>>,
}

#[derive(Debug, Deserialize)]
struct Check {
    name: String,
    #[serde(default)]
    description: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct Diagnostic {
    diagnostic: Message,
    check: String,
    object: Object,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct Message {
    message: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct Object {
    k8s_object: K8sObject,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct K8sObject {
    #[serde(default)]
    namespace: String,
    name: String,
    group_version_kind: Gvk,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct Gvk {
    #[serde(default)]
    group: String,
    version: String,
    kind: String,
}

/// `container "name" ...` messages name the offending container.
fn container_from_message(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("container \"")?;
    Some(rest[..rest.find('"')?].to_string())
}

pub(super) fn parse(report: &str) -> Result<Vec<RawFinding>, String> {
    let report: Report = decode(report)?;
    let descriptions: HashMap<_, _> = report
        .checks
        .iter()
        .map(|c| (c.name.as_str(), c.description.as_str()))
        .collect();
    let mut out = Vec::new();
    for d in report.reports.unwrap_or_default() {
        let gvk = &d.object.k8s_object.group_version_kind;
        let api_version = if gvk.group.is_empty() {
            gvk.version.clone()
        } else {
            format!("{}/{}", gvk.group, gvk.version)
        };
        let description = descriptions.get(d.check.as_str()).copied().unwrap_or(&d.diagnostic.message);
        out.push(RawFinding {
            policy: descriptor(Tool::KubeLinter, &d.check, description),
            hint: ResourceHint {
                api_version: Some(api_version),
                kind: Some(gvk.kind.clone()),
                name: d.object.k8s_object.name.clone(),
                namespace: Some(d.object.k8s_object.namespace.clone()),
            },
            container: container_from_message(&d.diagnostic.message),
            severity: String::new(),
        });
    }
    Ok(out)
}
