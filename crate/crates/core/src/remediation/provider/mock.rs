//! Offline provider that answers from a table keyed by canonical policy.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde_yaml::{Mapping, Value};

use super::{Provider, ProviderError, QueryParams};
use crate::analysis::builtin::{check_quantity, QuantityCeiling, QuantityState};
use crate::manifest::pod_spec_mut;
use crate::remediation::prompt_snippet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MockMode {
    /// Apply the policy's fix template.
    Fix,
    /// Change the snippet without fixing it.
    Break,
    /// Return the snippet unchanged.
    Echo,
    /// Answer with prose only.
    Prose,
    /// Fail every request with a transient error.
    Fail,
}

impl MockMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MockMode::Fix => "fix",
            MockMode::Break => "break",
            MockMode::Echo => "echo",
            MockMode::Prose => "prose",
            MockMode::Fail => "fail",
        }
    }
}

impl FromStr for MockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [MockMode::Fix, MockMode::Break, MockMode::Echo, MockMode::Prose, MockMode::Fail]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mock mode {s:?}"))
    }
}

pub const PROSE_RESPONSE: &str = "I cannot help with that request.";

#[derive(Debug, Clone)]
pub struct MockProvider {
    id: String,
    default: MockMode,
    table: BTreeMap<String, MockMode>,
}

impl MockProvider {
    pub fn new(mode: MockMode) -> Self {
        Self {
            id: format!("mock:{}", mode.as_str()),
            default: mode,
            table: BTreeMap::new(),
        }
    }

    /// Overrides the mode for one canonical key.
    pub fn with_mode_for(mut self, key: &str, mode: MockMode) -> Self {
        self.table.insert(key.to_string(), mode);
        self
    }

    pub fn mode_for(&self, key: Option<&str>) -> MockMode {
        key.and_then(|k| self.table.get(k)).copied().unwrap_or(self.default)
    }
}

impl Provider for MockProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn model(&self) -> &str {
        "mock"
    }

    fn send(&self, prompt: &str, params: &QueryParams) -> Result<String, ProviderError> {
        let key = params.policy_key.as_deref();
        let snippet = prompt_snippet(prompt);
        match self.mode_for(key) {
            MockMode::Echo => Ok(snippet.to_string()),
            MockMode::Prose => Ok(PROSE_RESPONSE.to_string()),
            MockMode::Fail => Err(ProviderError::Transient("mock provider configured to fail".into())),
            mode => {
                let Ok(mut tree) = serde_yaml::from_str::<Value>(snippet) else {
                    return Ok(snippet.to_string());
                };
                let changed = match mode {
                    MockMode::Fix => fix(key.unwrap_or_default(), &mut tree),
                    _ => break_snippet(key.unwrap_or_default(), &mut tree),
                };
                if !changed {
                    return Ok(snippet.to_string());
                }
                let yaml = serde_yaml::to_string(&tree).expect("serializable");
                Ok(format!("```yaml\n{yaml}```\n"))
            }
        }
    }
}

fn containers_mut(tree: &mut Value) -> Vec<&mut Value> {
    let kind = tree.get("kind").and_then(Value::as_str).unwrap_or_default().to_string();
    let Some(spec) = pod_spec_mut(tree, &kind).and_then(Value::as_mapping_mut) else {
        return Vec::new();
    };
    spec.iter_mut()
        .filter(|(k, _)| k.as_str() == Some("containers") || k.as_str() == Some("initContainers"))
        .filter_map(|(_, v)| v.as_sequence_mut())
        .flatten()
        .collect()
}

/// Returns the mapping at `key`, creating it (or replacing a non-mapping).
fn child_mapping<'a>(map: &'a mut Mapping, key: &str) -> &'a mut Mapping {
    let entry = map.entry(Value::from(key)).or_insert_with(|| Value::Mapping(Mapping::new()));
    if !entry.is_mapping() {
        *entry = Value::Mapping(Mapping::new());
    }
    entry.as_mapping_mut().expect("mapping")
}

/// Puts `key: value` first in `map`, replacing any existing entry.
fn insert_front(map: &mut Mapping, key: &str, value: Value) {
    let mut out = Mapping::new();
    out.insert(Value::from(key), value);
    for (k, v) in std::mem::take(map) {
        if k.as_str() != Some(key) {
            out.insert(k, v);
        }
    }
    *map = out;
}

const QUANTITY_DEFAULTS: [(&str, &str, &str); 4] = [
    ("requests", "memory", "250Mi"),
    ("limits", "memory", "512Mi"),
    ("requests", "cpu", "250m"),
    ("limits", "cpu", "500m"),
];

fn set_quantity(container: &mut Value, section: &str, field: &str, only_invalid: bool) -> bool {
    let ceiling = QuantityCeiling::default();
    let max = if field == "memory" { ceiling.memory_bytes } else { ceiling.cpu_cores };
    let Some(c) = container.as_mapping_mut() else {
        return false;
    };
    let resources = child_mapping(c, "resources");
    let section_map = child_mapping(resources, section);
    let state = check_quantity(section_map.get(field), max);
    let replace = match state {
        QuantityState::Valid(_) => false,
        QuantityState::Missing => !only_invalid,
        QuantityState::Invalid(_) => true,
    };
    if replace {
        let default = QUANTITY_DEFAULTS
            .iter()
            .find(|(s, f, _)| *s == section && *f == field)
            .map(|(_, _, d)| *d)
            .unwrap_or("1");
        insert_front(section_map, field, Value::from(default));
    }
    replace
}

fn set_security_flag(container: &mut Value, flag: &str, value: bool) -> bool {
    let Some(c) = container.as_mapping_mut() else {
        return false;
    };
    let sc = child_mapping(c, "securityContext");
    let before = sc.get(flag).cloned();
    sc.insert(Value::from(flag), Value::Bool(value));
    before != Some(Value::Bool(value))
}

fn fix(key: &str, tree: &mut Value) -> bool {
    let mut changed = false;
    match key {
        "memory-request" | "memory-limit" | "cpu-request" | "cpu-limit" => {
            let (section, field) = match key {
                "memory-request" => ("requests", "memory"),
                "memory-limit" => ("limits", "memory"),
                "cpu-request" => ("requests", "cpu"),
                _ => ("limits", "cpu"),
            };
            for c in containers_mut(tree) {
                changed |= set_quantity(c, section, field, false);
            }
        }
        "resource-quantity-sanity" => {
            for c in containers_mut(tree) {
                for (section, field, _) in QUANTITY_DEFAULTS {
                    changed |= set_quantity(c, section, field, true);
                }
            }
        }
        "privilege-escalation" => {
            for c in containers_mut(tree) {
                changed |= set_security_flag(c, "allowPrivilegeEscalation", false);
            }
        }
        "privileged-container" => {
            for c in containers_mut(tree) {
                changed |= set_security_flag(c, "privileged", false);
            }
        }
        "sys-admin-capability" => {
            for c in containers_mut(tree) {
                let added = c
                    .get_mut("securityContext")
                    .and_then(|s| s.get_mut("capabilities"))
                    .and_then(|cap| cap.get_mut("add"))
                    .and_then(Value::as_sequence_mut);
                if let Some(list) = added {
                    let before = list.len();
                    list.retain(|v| !matches!(v.as_str(), Some("SYS_ADMIN" | "CAP_SYS_ADMIN")));
                    changed |= list.len() != before;
                }
            }
        }
        "image-tag-pinned" => {
            for c in containers_mut(tree) {
                let Some(image) = c.get("image").and_then(Value::as_str) else {
                    continue;
                };
                if crate::analysis::builtin::image_is_pinned(image) {
                    continue;
                }
                let slash = image.rfind('/').map_or(0, |i| i + 1);
                let repo = match image[slash..].find(':') {
                    Some(i) => &image[..slash + i],
                    None => image,
                };
                let pinned = format!("{repo}:1.0.0");
                c.as_mapping_mut()
                    .expect("container mapping")
                    .insert(Value::from("image"), Value::from(pinned));
                changed = true;
            }
        }
        "default-namespace" => {
            if let Some(meta) = tree.get_mut("metadata").and_then(Value::as_mapping_mut) {
                meta.insert(Value::from("namespace"), Value::from("app"));
                changed = true;
            }
        }
        "host-path-volume" => {
            let kind = tree.get("kind").and_then(Value::as_str).unwrap_or_default().to_string();
            let volumes = pod_spec_mut(tree, &kind)
                .and_then(|s| s.get_mut("volumes"))
                .and_then(Value::as_sequence_mut);
            for v in volumes.into_iter().flatten() {
                if let Some(m) = v.as_mapping_mut() {
                    if m.remove("hostPath").is_some() {
                        m.insert(Value::from("emptyDir"), Value::Mapping(Mapping::new()));
                        changed = true;
                    }
                }
            }
        }
        "cluster-role-wildcard" => {
            let rules = tree.get_mut("rules").and_then(Value::as_sequence_mut);
            for rule in rules.into_iter().flatten() {
                let Some(verbs) = rule.get_mut("verbs").and_then(Value::as_sequence_mut) else {
                    continue;
                };
                if verbs.iter().any(|v| v.as_str() == Some("*")) {
                    *verbs = ["get", "list", "watch"].into_iter().map(Value::from).collect();
                    changed = true;
                }
            }
        }
        _ => {}
    }
    changed
}

fn break_snippet(key: &str, tree: &mut Value) -> bool {
    if key == "memory-request" {
        let mut changed = false;
        for c in containers_mut(tree) {
            let Some(m) = c.as_mapping_mut() else { continue };
            let requests = child_mapping(child_mapping(m, "resources"), "requests");
            insert_front(requests, "memory", Value::from("0"));
            changed = true;
        }
        return changed;
    }
    let Some(meta) = tree.get_mut("metadata").and_then(Value::as_mapping_mut) else {
        return false;
    };
    child_mapping(meta, "labels").insert(Value::from("refactored"), Value::from("true"));
    true
}
