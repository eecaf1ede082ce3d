use serde::Deserialize;

use super::{decode, descriptor};
use crate::analysis::{RawFinding, ResourceHint, Tool};

#[derive(Debug, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
struct Report {
    #[serde(default)]
    policy_validation_results: Option<Vec<FileResult>>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct FileResult {
    #[serde(default)]
    rule_results: Option<Vec<RuleResult>>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RuleResult {
    identifier: String,
    name: String,
    #[serde(default)]
    occurrences_details: Vec<Occurrence>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Occurrence {
    metadata_name: String,
    kind: String,
    #[serde(default)]
    is_skipped: bool,
}

/// One finding per failing resource; datree reports no namespace or
/// container.
pub(super) fn parse(report: &str) -> Result<Vec<RawFinding>, String> {
    let report: Report = decode(report)?;
    let mut out = Vec::new();
    for file in report.policy_validation_results.unwrap_or_default() {
        for rule in file.rule_results.unwrap_or_default() {
            for occ in rule.occurrences_details.iter().filter(|o| !o.is_skipped) {
                out.push(RawFinding {
                    policy: descriptor(Tool::Datree, &rule.identifier, &rule.name),
                    hint: ResourceHint {
                        kind: Some(occ.kind.clone()),
                        name: occ.metadata_name.clone(),
                        ..Default::default()
                    },
                    container: None,
                    severity: String::new(),
                });
            }
        }
    }
    Ok(out)
}
