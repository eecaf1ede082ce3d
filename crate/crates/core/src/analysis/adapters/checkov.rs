use serde::Deserialize;

use super::{decode, descriptor};
use crate::analysis::{RawFinding, ResourceHint, Tool};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Report {
    // one entry per framework when several ran
    Many(Vec<FrameworkReport>),
    One(FrameworkReport),
}

impl Default for Report {
    fn default() -> Self {
        Report::Many(Vec::new())
    }
}

#[derive(Debug, Deserialize)]
struct FrameworkReport {
    #[serde(default)]
    check_type: Option<String>,
    #[serde(default)]
    results: Option<Results>,
}

#[derive(Debug, Deserialize, Default)]
struct Results {
    #[serde(default)]
    failed_checks: Vec<FailedCheck>,
}

#[derive(Debug, Deserialize)]
struct FailedCheck {
    check_id: String,
    check_name: String,
    resource: String,
    #[serde(default)]
    severity: Option<String>,
}

/// `Kind.namespace.name`; names may contain dots, namespaces cannot.
fn hint(resource: &str) -> Result<ResourceHint, String> {
    let mut parts = resource.splitn(3, '.');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(kind), Some(ns), Some(name)) if !kind.is_empty() && !name.is_empty() => Ok(ResourceHint {
            api_version: None,
            kind: Some(kind.to_string()),
            name: name.to_string(),
            namespace: Some(ns.to_string()),
        }),
        _ => Err(format!("unrecognized checkov resource id {resource:?}")),
    }
}

pub(super) fn parse(report: &str) -> Result<Vec<RawFinding>, String> {
    let frameworks = match decode::<Report>(report)? {
        Report::Many(v) => v,
        Report::One(r) => vec![r],
    };
    let mut out = Vec::new();
    for fw in frameworks {
        if fw.check_type.as_deref().is_some_and(|t| t != "kubernetes") {
            continue;
        }
        for check in fw.results.unwrap_or_default().failed_checks {
            out.push(RawFinding {
                policy: descriptor(Tool::Checkov, &check.check_id, &check.check_name),
                hint: hint(&check.resource)?,
                container: None,
                severity: check.severity.unwrap_or_default(),
            });
        }
    }
    Ok(out)
}
