use super::*;
use crate::manifest::parse_manifests;

const LISTING_POD: &str = include_str!("../../../fixtures/listing1_pod.yaml");

fn scan(text: &str) -> Vec<Finding> {
    run_builtin_analyzer(&parse_manifests(text), &ChartRef::default())
}

fn ids(findings: &[Finding]) -> Vec<(&str, Option<&str>)> {
    findings
        .iter()
        .map(|f| (f.policy.policy_id.as_str(), f.container.as_deref()))
        .collect()
}

fn count(findings: &[Finding], policy: &str) -> usize {
    findings.iter().filter(|f| f.policy.policy_id == policy).count()
}

fn deployment(pod_spec: &str) -> String {
    let indented: String = pod_spec.lines().map(|l| format!("      {l}\n")).collect();
    format!(
        "apiVersion: apps/v1\nkind: Deployment\nmetadata:\n  name: web\n  namespace: shop\nspec:\n  template:\n    metadata:\n      labels:\n        app: web\n    spec:\n{indented}"
    )
}

const HARDENED_CONTAINER: &str = "containers:
- name: app
  image: nginx:1.25.3
  resources:
    requests: {memory: 128Mi, cpu: 100m}
    limits: {memory: 256Mi, cpu: 500m}
  securityContext:
    allowPrivilegeEscalation: false
";

const ALLOW_WEB: &str = "---
apiVersion: networking.k8s.io/v1
kind: NetworkPolicy
metadata:
  name: allow-web
  namespace: shop
spec:
  podSelector:
    matchLabels:
      app: web
  ingress:
  - from:
    - podSelector: {}
";

#[test]
fn listing_pod_has_one_memory_request_finding() {
    let findings = scan(LISTING_POD);
    assert_eq!(count(&findings, MEM_REQ), 1);
    let f = findings.iter().find(|f| f.policy.policy_id == MEM_REQ).unwrap();
    assert_eq!(f.container.as_deref(), Some("busybox-container"));
    assert_eq!(f.resource.name, "busybox-pod");
    assert_eq!(f.resource.namespace, "busybox-namespace");
    assert_eq!(f.policy.description, "Ensure each container has a configured memory request");
    // requests.cpu is set, so no CPU request finding
    assert_eq!(count(&findings, CPU_REQ), 0);
    assert_eq!(count(&findings, DEFAULT_NS), 0);
}

#[test]
fn hardened_deployment_with_network_policy_is_clean() {
    let text = deployment(HARDENED_CONTAINER) + ALLOW_WEB;
    assert_eq!(ids(&scan(&text)), vec![]);
}

#[test]
fn missing_escalation_flag_is_a_violation() {
    let text = "apiVersion: v1\nkind: Pod\nmetadata:\n  name: p\n  namespace: x\nspec:\n  containers:\n  - name: c\n    image: a:1\n    securityContext: {}\n";
    assert_eq!(count(&scan(text), PRIV_ESC), 1);
    let explicit_true = text.replace("securityContext: {}", "securityContext: {allowPrivilegeEscalation: true}");
    assert_eq!(count(&scan(&explicit_true), PRIV_ESC), 1);
    let explicit_false = text.replace("securityContext: {}", "securityContext: {allowPrivilegeEscalation: false}");
    assert_eq!(count(&scan(&explicit_false), PRIV_ESC), 0);
}

#[test]
fn empty_or_null_volumes_are_not_host_path() {
    for volumes in ["volumes: []\n", "volumes: null\n", "volumes:\n"] {
        let text = deployment(&format!("{HARDENED_CONTAINER}{volumes}")) + ALLOW_WEB;
        assert_eq!(count(&scan(&text), HOSTPATH), 0, "{volumes}");
    }
    let text = deployment(&format!(
        "{HARDENED_CONTAINER}volumes:\n- name: proc\n  hostPath:\n    path: /proc\n"
    ));
    assert_eq!(count(&scan(&text), HOSTPATH), 1);
}

#[test]
fn empty_network_policy_elsewhere_does_not_bind() {
    let empty_elsewhere = "---\napiVersion: networking.k8s.io/v1\nkind: NetworkPolicy\nmetadata:\n  name: empty\n  namespace: other\nspec:\n  podSelector: {}\n";
    let text = deployment(HARDENED_CONTAINER) + empty_elsewhere;
    assert_eq!(count(&scan(&text), NETPOL), 1);

    // same namespace but no rules
    let empty_same = empty_elsewhere.replace("namespace: other", "namespace: shop");
    assert_eq!(count(&scan(&(deployment(HARDENED_CONTAINER) + &empty_same)), NETPOL), 1);

    // rules in another namespace
    let ruled_elsewhere = ALLOW_WEB.replace("namespace: shop", "namespace: other");
    assert_eq!(count(&scan(&(deployment(HARDENED_CONTAINER) + &ruled_elsewhere)), NETPOL), 1);

    // rules, same namespace, selector misses the pod labels
    let wrong_selector = ALLOW_WEB.replace("app: web", "app: db");
    assert_eq!(count(&scan(&(deployment(HARDENED_CONTAINER) + &wrong_selector)), NETPOL), 1);

    assert_eq!(count(&scan(&(deployment(HARDENED_CONTAINER) + ALLOW_WEB)), NETPOL), 0);
}

#[test]
fn bogus_limit_values_fail_sanity() {
    for value in ["0", "john", "\"0\"", "2Pi"] {
        let container = HARDENED_CONTAINER.replace("memory: 256Mi", &format!("memory: {value}"));
        let findings = scan(&(deployment(&container) + ALLOW_WEB));
        assert_eq!(count(&findings, QTY_SANE), 1, "{value}");
        assert_eq!(count(&findings, MEM_LIM), 1, "{value}");
    }
    let cpu = HARDENED_CONTAINER.replace("cpu: 500m", "cpu: 1000");
    assert_eq!(count(&scan(&(deployment(&cpu) + ALLOW_WEB)), QTY_SANE), 1);
}

#[test]
fn zero_memory_request_still_violates_memory_request() {
    let patched = LISTING_POD.replace("        cpu: 250m\n", "        memory: 0\n        cpu: 250m\n");
    let findings = scan(&patched);
    assert_eq!(count(&findings, MEM_REQ), 1);
    assert_eq!(count(&findings, QTY_SANE), 1);
}

#[test]
fn adding_memory_request_removes_exactly_that_finding() {
    let before = scan(LISTING_POD);
    let after = scan(&LISTING_POD.replace("        cpu: 250m\n", "        memory: 250Mi\n        cpu: 250m\n"));
    let mut expected = before.clone();
    expected.retain(|f| f.policy.policy_id != MEM_REQ);
    assert_eq!(after, expected);
}

#[test]
fn privileged_sys_admin_and_tags() {
    let container = "containers:
- name: a
  image: nginx
  securityContext:
    privileged: true
    capabilities:
      add: [NET_ADMIN, SYS_ADMIN]
- name: b
  image: registry.local:5000/team/app:latest
- name: c
  image: registry.local:5000/team/app@sha256:abc
";
    let findings = scan(&deployment(container));
    assert_eq!(count(&findings, PRIVILEGED), 1);
    assert_eq!(count(&findings, SYS_ADMIN), 1);
    let tags: Vec<_> = findings
        .iter()
        .filter(|f| f.policy.policy_id == IMG_TAG)
        .map(|f| f.container.as_deref().unwrap())
        .collect();
    assert_eq!(tags, ["a", "b"]);
}

#[test]
fn image_pinning() {
    assert!(image_is_pinned("busybox:1.36"));
    assert!(image_is_pinned("localhost:5000/x:1"));
    assert!(image_is_pinned("x@sha256:00"));
    assert!(!image_is_pinned("localhost:5000/x"));
    assert!(!image_is_pinned("x:latest"));
    assert!(!image_is_pinned("x:"));
}

#[test]
fn default_namespace_and_cronjob_containers() {
    let text = "apiVersion: batch/v1
kind: CronJob
metadata:
  name: nightly
spec:
  jobTemplate:
    spec:
      template:
        spec:
          initContainers:
          - name: init
            image: busybox:1.36
          containers:
          - name: job
            image: busybox:1.36
";
    let findings = scan(text);
    assert_eq!(count(&findings, DEFAULT_NS), 1);
    assert_eq!(count(&findings, MEM_REQ), 2);
    assert_eq!(findings[0].resource.namespace, "default");
}

#[test]
fn cluster_role_wildcards() {
    let text = "apiVersion: rbac.authorization.k8s.io/v1
kind: ClusterRole
metadata:
  name: god
rules:
- apiGroups: ['*']
  resources: ['*']
  verbs: ['*']
---
apiVersion: rbac.authorization.k8s.io/v1
kind: ClusterRole
metadata:
  name: reader
rules:
- apiGroups: ['']
  resources: ['*']
  verbs: [get, list]
";
    let findings = scan(text);
    assert_eq!(ids(&findings), vec![(CR_WILDCARD, None)]);
    assert_eq!(findings[0].resource.name, "god");
}

#[test]
fn order_is_document_then_policy_then_container() {
    let text = format!(
        "{}---\n{}",
        deployment("containers:\n- name: z\n  image: a:1\n- name: y\n  image: b:1\n"),
        LISTING_POD
    );
    let findings = scan(&text);
    assert_eq!(findings, scan(&text));
    let web: Vec<_> = findings.iter().take_while(|f| f.resource.name == "web").collect();
    let mut sorted = web.clone();
    sorted.sort_by(|a, b| a.policy.policy_id.cmp(&b.policy.policy_id));
    assert_eq!(web, sorted);
    let mem: Vec<_> = web
        .iter()
        .filter(|f| f.policy.policy_id == MEM_REQ)
        .map(|f| f.container.as_deref().unwrap())
        .collect();
    assert_eq!(mem, ["z", "y"]);
    assert!(findings.iter().skip(web.len()).all(|f| f.resource.name == "busybox-pod"));
}

#[test]
fn catalog_is_well_formed() {
    let mut seen = std::collections::HashSet::new();
    for p in POLICIES {
        assert!(seen.insert(p.id), "{}", p.id);
        assert!(!p.description.is_empty());
    }
    assert_eq!(POLICIES.len(), 13);
}
