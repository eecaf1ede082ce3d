use serde::Deserialize;

use super::{decode, descriptor};
use crate::analysis::{RawFinding, ResourceHint, Tool};

#[derive(Debug, Deserialize, Default)]
struct Report {
    #[serde(default)]
    queries: Option<Vec<Query>>,
}

#[derive(Debug, Deserialize)]
struct Query {
    query_id: String,
    query_name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    severity: String,
    #[serde(default)]
    files: Vec<FileHit>,
}

#[derive(Debug, Deserialize)]
struct FileHit {
    #[serde(default)]
    resource_type: String,
    #[serde(default)]
    resource_name: String,
    #[serde(default)]
    search_key: String,
}

/// Pulls `X` out of a `...containers.name={{X}}...` search key.
fn container_from_search_key(key: &str) -> Option<String> {
    let marker = "ontainers.name={{";
    let start = key.find(marker)? + marker.len();
    let end = key[start..].find("}}")? + start;
    Some(key[start..end].to_string())
}

pub(super) fn parse(report: &str) -> Result<Vec<RawFinding>, String> {
    let report: Report = decode(report)?;
    let mut out = Vec::new();
    for q in report.queries.unwrap_or_default() {
        let description = if q.description.trim().is_empty() { &q.query_name } else { &q.description };
        for hit in q.files {
            if hit.resource_name.is_empty() {
                return Err(format!("kics query {} has a result without resource_name", q.query_id));
            }
            out.push(RawFinding {
                policy: descriptor(Tool::Kics, &q.query_id, description),
                hint: ResourceHint {
                    kind: (!hit.resource_type.is_empty()).then(|| hit.resource_type.clone()),
                    name: hit.resource_name.clone(),
                    ..Default::default()
                },
                container: container_from_search_key(&hit.search_key),
                severity: q.severity.clone(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_key_container() {
        assert_eq!(
            container_from_search_key("metadata.name={{web}}.spec.template.spec.containers.name={{nginx}}.image"),
            Some("nginx".into())
        );
        assert_eq!(
            container_from_search_key("metadata.name={{p}}.spec.initContainers.name={{init}}"),
            Some("init".into())
        );
        assert_eq!(container_from_search_key("metadata.name={{web}}.spec"), None);
    }
}
