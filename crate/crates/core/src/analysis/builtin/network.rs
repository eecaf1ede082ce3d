//! NetworkPolicy coverage of workloads.

use std::collections::BTreeMap;

use serde_yaml::Value;

use crate::manifest::{pod_metadata, ManifestSet, ResourceDoc};

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn labels_of(meta: Option<&Value>) -> BTreeMap<String, String> {
    meta.and_then(|m| m.get("labels"))
        .and_then(Value::as_mapping)
        .map(|m| {
            m.iter()
                .filter_map(|(k, v)| Some((scalar_string(k)?, scalar_string(v)?)))
                .collect()
        })
        .unwrap_or_default()
}

/// Evaluates a `LabelSelector`. An empty or absent selector matches
/// everything; an unparseable one matches nothing.
pub fn selector_matches(selector: Option<&Value>, labels: &BTreeMap<String, String>) -> bool {
    let selector = match selector {
        None | Some(Value::Null) => return true,
        Some(Value::Mapping(m)) => m,
        Some(_) => return false,
    };
    if let Some(match_labels) = selector.get("matchLabels") {
        let Some(map) = match_labels.as_mapping() else {
            return match_labels.is_null();
        };
        for (k, v) in map {
            let (Some(k), Some(v)) = (scalar_string(k), scalar_string(v)) else {
                return false;
            };
            if labels.get(&k) != Some(&v) {
                return false;
            }
        }
    }
    if let Some(exprs) = selector.get("matchExpressions") {
        let Some(exprs) = exprs.as_sequence() else {
            return exprs.is_null();
        };
        for expr in exprs {
            let Some(key) = expr.get("key").and_then(scalar_string) else {
                return false;
            };
            let values: Vec<String> = expr
                .get("values")
                .and_then(Value::as_sequence)
                .map(|vs| vs.iter().filter_map(scalar_string).collect())
                .unwrap_or_default();
            let current = labels.get(&key);
            let ok = match expr.get("operator").and_then(Value::as_str) {
                Some("In") => current.is_some_and(|v| values.contains(v)),
                Some("NotIn") => current.map_or(true, |v| !values.contains(v)),
                Some("Exists") => current.is_some(),
                Some("DoesNotExist") => current.is_none(),
                _ => false,
            };
            if !ok {
                return false;
            }
        }
    }
    true
}

fn has_rules(policy: &Value, direction: &str) -> bool {
    policy
        .get("spec")
        .and_then(|s| s.get(direction))
        .and_then(Value::as_sequence)
        .is_some_and(|rules| !rules.is_empty())
}

/// True when a NetworkPolicy in the workload's namespace, with at least one
/// ingress or egress rule, selects the workload's pods.
pub fn workload_is_covered(set: &ManifestSet, workload: &ResourceDoc) -> bool {
    let labels = labels_of(pod_metadata(&workload.tree, &workload.id.kind));
    set.docs
        .iter()
        .filter(|d| d.id.kind == "NetworkPolicy")
        .filter(|d| d.id.namespace == workload.id.namespace)
        .filter(|d| has_rules(&d.tree, "ingress") || has_rules(&d.tree, "egress"))
        .any(|d| {
            let selector = d.tree.get("spec").and_then(|s| s.get("podSelector"));
            selector_matches(selector, &labels)
        })
}
