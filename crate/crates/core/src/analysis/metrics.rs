//! Per-tool counts and uniquely reported policies.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{EquivalenceMap, Finding, Tool};

/// Findings of one tool, by policy id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ToolCounts {
    pub by_policy: BTreeMap<String, usize>,
    pub total: usize,
}

pub fn count_misconfigurations(findings: &[Finding]) -> BTreeMap<Tool, ToolCounts> {
    let mut table: BTreeMap<Tool, ToolCounts> = BTreeMap::new();
    for f in findings {
        let counts = table.entry(f.tool()).or_default();
        *counts.by_policy.entry(f.policy.policy_id.clone()).or_default() += 1;
        counts.total += 1;
    }
    table
}

/// For each tool that reported anything, the canonical keys no other tool
/// reported.
pub fn unique_policies(findings: &[Finding], map: &EquivalenceMap) -> BTreeMap<Tool, BTreeSet<String>> {
    let mut reported: BTreeMap<Tool, BTreeSet<String>> = BTreeMap::new();
    let mut reporters: BTreeMap<String, BTreeSet<Tool>> = BTreeMap::new();
    for f in findings {
        let key = map.canonical_key(f.tool(), &f.policy.policy_id);
        reported.entry(f.tool()).or_default().insert(key.clone());
        reporters.entry(key).or_default().insert(f.tool());
    }
    reported
        .into_iter()
        .map(|(tool, keys)| {
            let unique = keys.into_iter().filter(|k| reporters[k].len() == 1).collect();
            (tool, unique)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::adapters::descriptor;
    use crate::catalog::ChartRef;
    use crate::manifest::ResourceId;

    fn finding(tool: Tool, id: &str) -> Finding {
        Finding {
            policy: descriptor(tool, id, "d"),
            resource: ResourceId::new("v1", "Pod", "p", "ns"),
            container: None,
            chart: ChartRef::default(),
            severity: String::new(),
        }
    }

    #[test]
    fn counts_partition_by_tool() {
        assert!(count_misconfigurations(&[]).is_empty());
        let fs = vec![
            finding(Tool::Checkov, "A"),
            finding(Tool::Checkov, "A"),
            finding(Tool::Checkov, "B"),
            finding(Tool::Checkov, "A"),
            finding(Tool::Kics, "A"),
        ];
        let t = count_misconfigurations(&fs);
        assert_eq!(t[&Tool::Checkov].by_policy["A"], 3);
        assert_eq!(t[&Tool::Checkov].by_policy["B"], 1);
        assert_eq!(t[&Tool::Checkov].total, 4);
        assert_eq!(t.values().map(|c| c.total).sum::<usize>(), fs.len());
    }

    #[test]
    fn shared_keys_are_not_unique() {
        let map = EquivalenceMap::bundled();
        let fs = vec![
            finding(Tool::Checkov, "CKV_K8S_20"),
            finding(Tool::Checkov, "CKV_K8S_999"),
            finding(Tool::Kubeaudit, "AllowPrivilegeEscalationNil"),
        ];
        let u = unique_policies(&fs, &map);
        assert_eq!(u[&Tool::Checkov], BTreeSet::from(["checkov:CKV_K8S_999".to_string()]));
        assert!(u[&Tool::Kubeaudit].is_empty());
    }
}
