//! Reference analyzer for a fixed catalog of workload and RBAC policies.
//!
//! The resource policies reject values that merely look configured: a limit
//! of `0`, a huge value or a non-quantity string does not satisfy them. The
//! NetworkPolicy check requires a same-namespace policy with real rules, and
//! the hostPath check ignores empty or null `volumes`.

mod network;
mod quantity;

use serde_yaml::Value;

use super::{Analyzer, AnalysisError, Finding, PolicyDescriptor, ScanOutput, ScanTarget, Tool};
use crate::catalog::ChartRef;
use crate::manifest::{is_workload, pod_spec, ManifestSet, ResourceDoc};

pub use network::{selector_matches, workload_is_covered};
pub use quantity::{check_quantity, parse_quantity, QuantityState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuiltinPolicy {
    pub id: &'static str,
    pub canonical_key: &'static str,
    pub description: &'static str,
    pub severity: &'static str,
}

pub const MEM_REQ: &str = "BI-MEM-REQ";
pub const MEM_LIM: &str = "BI-MEM-LIM";
pub const CPU_REQ: &str = "BI-CPU-REQ";
pub const CPU_LIM: &str = "BI-CPU-LIM";
pub const QTY_SANE: &str = "BI-QTY-SANE";
pub const PRIV_ESC: &str = "BI-PRIV-ESC";
pub const PRIVILEGED: &str = "BI-PRIVILEGED";
pub const SYS_ADMIN: &str = "BI-SYS-ADMIN";
pub const IMG_TAG: &str = "BI-IMG-TAG";
pub const DEFAULT_NS: &str = "BI-DEFAULT-NS";
pub const HOSTPATH: &str = "BI-HOSTPATH";
pub const NETPOL: &str = "BI-NETPOL";
pub const CR_WILDCARD: &str = "BI-CR-WILDCARD";

pub const POLICIES: &[BuiltinPolicy] = &[
    BuiltinPolicy {
        id: MEM_REQ,
        canonical_key: "memory-request",
        description: "Ensure each container has a configured memory request",
        severity: "MEDIUM",
    },
    BuiltinPolicy {
        id: MEM_LIM,
        canonical_key: "memory-limit",
        description: "Ensure each container has a configured memory limit",
        severity: "MEDIUM",
    },
    BuiltinPolicy {
        id: CPU_REQ,
        canonical_key: "cpu-request",
        description: "Ensure each container has a configured CPU request",
        severity: "MEDIUM",
    },
    BuiltinPolicy {
        id: CPU_LIM,
        canonical_key: "cpu-limit",
        description: "Ensure each container has a configured CPU limit",
        severity: "MEDIUM",
    },
    BuiltinPolicy {
        id: QTY_SANE,
        canonical_key: "resource-quantity-sanity",
        description: "Ensure container CPU and memory requests and limits are positive quantities within sane bounds",
        severity: "MEDIUM",
    },
    BuiltinPolicy {
        id: PRIV_ESC,
        canonical_key: "privilege-escalation",
        description: "Prevent containers from escalating privileges",
        severity: "HIGH",
    },
    BuiltinPolicy {
        id: PRIVILEGED,
        canonical_key: "privileged-container",
        description: "Prevent containers from running in privileged mode",
        severity: "HIGH",
    },
    BuiltinPolicy {
        id: SYS_ADMIN,
        canonical_key: "sys-admin-capability",
        description: "Prevent containers from adding the SYS_ADMIN capability",
        severity: "HIGH",
    },
    BuiltinPolicy {
        id: IMG_TAG,
        canonical_key: "image-tag-pinned",
        description: "Ensure each container image has a pinned (tag) version",
        severity: "LOW",
    },
    BuiltinPolicy {
        id: DEFAULT_NS,
        canonical_key: "default-namespace",
        description: "Prevent workloads from using the default namespace",
        severity: "LOW",
    },
    BuiltinPolicy {
        id: HOSTPATH,
        canonical_key: "host-path-volume",
        description: "Prevent workloads from mounting hostPath volumes",
        severity: "HIGH",
    },
    BuiltinPolicy {
        id: NETPOL,
        canonical_key: "network-policy-binding",
        description: "Ensure each workload is selected by a network policy in its namespace with at least one ingress or egress rule",
        severity: "MEDIUM",
    },
    BuiltinPolicy {
        id: CR_WILDCARD,
        canonical_key: "cluster-role-wildcard",
        description: "Prevent ClusterRoles from granting all verbs on all resources",
        severity: "HIGH",
    },
];

pub fn policy(id: &str) -> Option<&'static BuiltinPolicy> {
    POLICIES.iter().find(|p| p.id == id)
}

impl BuiltinPolicy {
    pub fn descriptor(&self) -> PolicyDescriptor {
        PolicyDescriptor {
            tool: Tool::Builtin,
            policy_id: self.id.to_string(),
            description: self.description.to_string(),
            equivalence_class: Some(self.canonical_key.to_string()),
        }
    }
}

/// Upper bounds above which a request or limit is treated as bogus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantityCeiling {
    pub memory_bytes: f64,
    pub cpu_cores: f64,
}

impl Default for QuantityCeiling {
    fn default() -> Self {
        Self {
            memory_bytes: 1_099_511_627_776.0, // 1Ti
            cpu_cores: 64.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BuiltinAnalyzer {
    pub ceiling: QuantityCeiling,
}

impl Analyzer for BuiltinAnalyzer {
    fn tool(&self) -> Tool {
        Tool::Builtin
    }

    fn version(&self) -> Result<String, AnalysisError> {
        Ok(env!("CARGO_PKG_VERSION").to_string())
    }

    fn analyze(&self, target: &ScanTarget<'_>) -> Result<ScanOutput, AnalysisError> {
        Ok(ScanOutput {
            findings: self.run(target.manifest, target.chart),
            quarantined: Vec::new(),
        })
    }
}

/// A violation before it is attached to a resource and chart.
struct Hit {
    policy: &'static str,
    container: Option<String>,
}

fn containers(spec: &Value) -> Vec<(String, &Value)> {
    ["containers", "initContainers"]
        .iter()
        .filter_map(|k| spec.get(*k).and_then(Value::as_sequence))
        .flatten()
        .enumerate()
        .map(|(i, c)| {
            let name = c
                .get("name")
                .and_then(Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| format!("#{i}"));
            (name, c)
        })
        .collect()
}

fn resource_field<'a>(container: &'a Value, section: &str, field: &str) -> Option<&'a Value> {
    container.get("resources")?.get(section)?.get(field)
}

/// A tag other than `latest`, or a digest, counts as pinned.
pub fn image_is_pinned(image: &str) -> bool {
    if image.contains('@') {
        return true;
    }
    let last = image.rsplit('/').next().unwrap_or(image);
    match last.split_once(':') {
        Some((_, tag)) => !tag.is_empty() && tag != "latest",
        None => false,
    }
}

fn string_list_contains(v: Option<&Value>, needle: &str) -> bool {
    v.and_then(Value::as_sequence)
        .is_some_and(|items| items.iter().any(|i| i.as_str() == Some(needle)))
}

impl BuiltinAnalyzer {
    pub fn new(ceiling: QuantityCeiling) -> Self {
        Self { ceiling }
    }

    fn container_hits(&self, name: &str, c: &Value, hits: &mut Vec<Hit>) {
        let mut push = |policy| {
            hits.push(Hit {
                policy,
                container: Some(name.to_string()),
            })
        };
        let fields = [
            (MEM_REQ, "requests", "memory", self.ceiling.memory_bytes),
            (MEM_LIM, "limits", "memory", self.ceiling.memory_bytes),
            (CPU_REQ, "requests", "cpu", self.ceiling.cpu_cores),
            (CPU_LIM, "limits", "cpu", self.ceiling.cpu_cores),
        ];
        let mut insane = false;
        for (policy, section, field, ceiling) in fields {
            match check_quantity(resource_field(c, section, field), ceiling) {
                QuantityState::Valid(_) => {}
                QuantityState::Missing => push(policy),
                QuantityState::Invalid(_) => {
                    insane = true;
                    push(policy);
                }
            }
        }
        if insane {
            push(QTY_SANE);
        }

        let sc = c.get("securityContext");
        let escalation = sc.and_then(|s| s.get("allowPrivilegeEscalation"));
        if escalation.and_then(Value::as_bool) != Some(false) {
            push(PRIV_ESC);
        }
        if sc.and_then(|s| s.get("privileged")).and_then(Value::as_bool) == Some(true) {
            push(PRIVILEGED);
        }
        let added = sc.and_then(|s| s.get("capabilities")).and_then(|c| c.get("add"));
        if string_list_contains(added, "SYS_ADMIN") || string_list_contains(added, "CAP_SYS_ADMIN") {
            push(SYS_ADMIN);
        }
        let pinned = c.get("image").and_then(Value::as_str).is_some_and(image_is_pinned);
        if !pinned {
            push(IMG_TAG);
        }
    }

    fn workload_hits(&self, set: &ManifestSet, doc: &ResourceDoc) -> Vec<Hit> {
        let mut hits = Vec::new();
        if let Some(spec) = pod_spec(&doc.tree, &doc.id.kind) {
            for (name, c) in containers(spec) {
                self.container_hits(&name, c, &mut hits);
            }
            let has_host_path = spec
                .get("volumes")
                .and_then(Value::as_sequence)
                .is_some_and(|vols| {
                    vols.iter()
                        .any(|v| v.get("hostPath").is_some_and(|h| !h.is_null()))
                });
            if has_host_path {
                hits.push(Hit { policy: HOSTPATH, container: None });
            }
        }
        if doc.id.namespace == crate::manifest::DEFAULT_NAMESPACE {
            hits.push(Hit { policy: DEFAULT_NS, container: None });
        }
        if !workload_is_covered(set, doc) {
            hits.push(Hit { policy: NETPOL, container: None });
        }
        hits
    }

    fn cluster_role_hits(doc: &ResourceDoc) -> Vec<Hit> {
        let wildcard = doc
            .tree
            .get("rules")
            .and_then(Value::as_sequence)
            .is_some_and(|rules| {
                rules.iter().any(|r| {
                    string_list_contains(r.get("verbs"), "*") && string_list_contains(r.get("resources"), "*")
                })
            });
        if wildcard {
            vec![Hit { policy: CR_WILDCARD, container: None }]
        } else {
            Vec::new()
        }
    }

    /// Findings in document order, then policy id, then container order.
    pub fn run(&self, set: &ManifestSet, chart: &ChartRef) -> Vec<Finding> {
        let mut out = Vec::new();
        for doc in &set.docs {
            let mut hits = if is_workload(&doc.id.kind) {
                self.workload_hits(set, doc)
            } else if doc.id.kind == "ClusterRole" {
                Self::cluster_role_hits(doc)
            } else {
                Vec::new()
            };
            // stable: container order survives within a policy
            hits.sort_by_key(|h| h.policy);
            for hit in hits {
                let p = policy(hit.policy).expect("catalog policy");
                out.push(Finding {
                    policy: p.descriptor(),
                    resource: doc.id.clone(),
                    container: hit.container,
                    chart: chart.clone(),
                    severity: p.severity.to_string(),
                });
            }
        }
        out
    }
}

/// Runs the built-in catalog with default ceilings.
pub fn run_builtin_analyzer(set: &ManifestSet, chart: &ChartRef) -> Vec<Finding> {
    BuiltinAnalyzer::default().run(set, chart)
}

#[cfg(test)]
mod tests;
