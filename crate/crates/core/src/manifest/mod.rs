//! Multi-document Kubernetes YAML: parsing with byte-exact spans, resource
//! lookup, splicing and snippet diffs.

mod diff;
mod split;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;
use thiserror::Error;

pub use diff::{diff_resource, normalize_trailing_whitespace, SnippetDiff};

/// Namespace assumed for resources that do not set one.
pub const DEFAULT_NAMESPACE: &str = "default";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ManifestError {
    #[error("resource {0} not found in manifest")]
    NotFound(ResourceId),
    #[error("resource {id} is ambiguous: {count} documents match")]
    Ambiguous { id: ResourceId, count: usize },
    #[error("patch rejected: {0}")]
    Patch(String),
    #[error("yaml error: {0}")]
    Yaml(String),
}

/// Identity of a Kubernetes object inside a rendered manifest.
///
/// The namespace is normalized on construction: an empty namespace becomes
/// `default`, so equality is plain field equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResourceId {
    pub api_version: String,
    pub kind: String,
    pub name: String,
    pub namespace: String,
}

impl ResourceId {
    pub fn new(
        api_version: impl Into<String>,
        kind: impl Into<String>,
        name: impl Into<String>,
        namespace: impl Into<String>,
    ) -> Self {
        let namespace = namespace.into();
        Self {
            api_version: api_version.into(),
            kind: kind.into(),
            name: name.into(),
            namespace: normalize_namespace(&namespace).to_string(),
        }
    }

    /// Reads the identity of a parsed document. Returns `None` unless both
    /// `kind` and `metadata.name` are non-empty strings.
    pub fn from_tree(tree: &Value) -> Option<Self> {
        let kind = tree.get("kind")?.as_str()?;
        let metadata = tree.get("metadata")?;
        let name = metadata.get("name")?.as_str()?;
        if kind.is_empty() || name.is_empty() {
            return None;
        }
        let api_version = tree
            .get("apiVersion")
            .and_then(Value::as_str)
            .unwrap_or_default();
        let namespace = metadata
            .get("namespace")
            .and_then(Value::as_str)
            .unwrap_or_default();
        Some(Self::new(api_version, kind, name, namespace))
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} {}/{}",
            self.api_version, self.kind, self.namespace, self.name
        )
    }
}

pub fn normalize_namespace(namespace: &str) -> &str {
    if namespace.trim().is_empty() {
        DEFAULT_NAMESPACE
    } else {
        namespace
    }
}

/// Half-open byte range into a parent text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// One top-level YAML document that describes a Kubernetes object.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceDoc {
    pub id: ResourceId,
    pub raw_text: String,
    pub span: Span,
    pub tree: Value,
}

impl ResourceDoc {
    /// Parses a standalone snippet holding exactly one resource document.
    /// A leading `---` line is tolerated.
    pub fn from_text(text: &str) -> Result<Self, ManifestError> {
        let set = parse_manifests(text);
        if let Some(err) = set.errors.first() {
            return Err(ManifestError::Yaml(err.message.clone()));
        }
        match (set.docs.len(), set.non_resource_docs.len()) {
            (1, 0) => Ok(set.docs.into_iter().next().expect("one document")),
            (0, _) => Err(ManifestError::Patch(
                "snippet does not contain a resource with kind and metadata.name".into(),
            )),
            (n, m) => Err(ManifestError::Patch(format!(
                "snippet must hold one document, found {}",
                n + m
            ))),
        }
    }
}

/// A document whose YAML failed to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocError {
    pub span: Span,
    pub message: String,
}

/// Kind of a tile in [`ManifestSet::segments`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// Separator lines, blank or comment-only chunks.
    Gap,
    Resource,
    NonResource,
    Error,
}

/// A parsed multi-document manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestSet {
    source_text: String,
    pub docs: Vec<ResourceDoc>,
    /// Spans of well-formed documents lacking `kind` or `metadata.name`.
    pub non_resource_docs: Vec<Span>,
    pub errors: Vec<DocError>,
}

impl ManifestSet {
    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty() && self.non_resource_docs.is_empty() && self.errors.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }

    /// Total number of documents, including ones that failed to parse.
    pub fn document_count(&self) -> usize {
        self.docs.len() + self.non_resource_docs.len() + self.errors.len()
    }

    /// Ordered tiling of the source text: every byte belongs to exactly one
    /// segment.
    pub fn segments(&self) -> Vec<(Span, SegmentKind)> {
        let mut docs: Vec<(Span, SegmentKind)> = self
            .docs
            .iter()
            .map(|d| (d.span, SegmentKind::Resource))
            .chain(
                self.non_resource_docs
                    .iter()
                    .map(|s| (*s, SegmentKind::NonResource)),
            )
            .chain(self.errors.iter().map(|e| (e.span, SegmentKind::Error)))
            .collect();
        docs.sort_by_key(|(s, _)| s.start);

        let mut out = Vec::with_capacity(docs.len() * 2 + 1);
        let mut cursor = 0;
        for (span, kind) in docs {
            if span.start > cursor {
                out.push((Span { start: cursor, end: span.start }, SegmentKind::Gap));
            }
            out.push((span, kind));
            cursor = span.end;
        }
        if cursor < self.source_text.len() {
            out.push((
                Span { start: cursor, end: self.source_text.len() },
                SegmentKind::Gap,
            ));
        }
        out
    }

    /// Number of container entries (`containers` and `initContainers`)
    /// across all resource documents.
    pub fn container_count(&self) -> usize {
        self.docs
            .iter()
            .filter_map(|d| pod_spec(&d.tree, &d.id.kind))
            .map(|spec| {
                ["containers", "initContainers"]
                    .iter()
                    .filter_map(|k| spec.get(*k).and_then(Value::as_sequence))
                    .map(Vec::len)
                    .sum::<usize>()
            })
            .sum()
    }
}

/// Splits `text` on top-level `---` boundaries and parses each document.
/// Documents that fail to parse are recorded in `errors` and do not abort
/// the rest of the set.
pub fn parse_manifests(text: &str) -> ManifestSet {
    let mut set = ManifestSet {
        source_text: text.to_string(),
        docs: Vec::new(),
        non_resource_docs: Vec::new(),
        errors: Vec::new(),
    };
    for span in split::document_spans(text) {
        let body = &text[span.start..span.end];
        if split::is_blank_document(body) {
            continue;
        }
        match serde_yaml::from_str::<Value>(body) {
            Ok(tree) => match ResourceId::from_tree(&tree) {
                Some(id) => set.docs.push(ResourceDoc {
                    id,
                    raw_text: body.to_string(),
                    span,
                    tree,
                }),
                None => set.non_resource_docs.push(span),
            },
            Err(err) => set.errors.push(DocError {
                span,
                message: err.to_string(),
            }),
        }
    }
    set
}

/// Returns the unique document whose identity equals `id`.
pub fn locate_resource<'a>(
    set: &'a ManifestSet,
    id: &ResourceId,
) -> Result<&'a ResourceDoc, ManifestError> {
    let mut matches = set.docs.iter().filter(|d| &d.id == id);
    let first = matches.next().ok_or_else(|| ManifestError::NotFound(id.clone()))?;
    let rest = matches.count();
    if rest > 0 {
        return Err(ManifestError::Ambiguous {
            id: id.clone(),
            count: rest + 1,
        });
    }
    Ok(first)
}

/// Replaces the document identified by `id` with `replacement.raw_text`.
/// Every byte outside the target span is preserved.
pub fn splice_resource(
    set: &ManifestSet,
    id: &ResourceId,
    replacement: &ResourceDoc,
) -> Result<ManifestSet, ManifestError> {
    let target = locate_resource(set, id)?;
    // the replacement must stand on its own as a single resource document
    let reparsed = ResourceDoc::from_text(&replacement.raw_text)?;
    let mut body = replacement.raw_text.clone();
    if split::starts_with_separator(&body) {
        return Err(ManifestError::Patch(
            "replacement must not start with a document separator".into(),
        ));
    }
    let source = set.source_text();
    let tail = &source[target.span.end..];
    if !tail.is_empty() && !body.ends_with('\n') {
        body.push('\n');
    }

    let mut text = String::with_capacity(source.len() + body.len());
    text.push_str(&source[..target.span.start]);
    text.push_str(&body);
    text.push_str(tail);

    let out = parse_manifests(&text);
    if out.document_count() != set.document_count() {
        return Err(ManifestError::Patch(format!(
            "splice changed document count from {} to {}",
            set.document_count(),
            out.document_count()
        )));
    }
    debug_assert!(out.docs.iter().any(|d| d.id == reparsed.id));
    Ok(out)
}

/// Workload kinds whose pod template the analyzers inspect.
pub const WORKLOAD_KINDS: &[&str] = &[
    "Pod",
    "Deployment",
    "StatefulSet",
    "DaemonSet",
    "Job",
    "CronJob",
    "ReplicaSet",
];

pub fn is_workload(kind: &str) -> bool {
    WORKLOAD_KINDS.contains(&kind)
}

/// Returns the pod template metadata (`metadata` of the pod itself for a
/// Pod) of a workload document.
pub fn pod_metadata<'a>(tree: &'a Value, kind: &str) -> Option<&'a Value> {
    match kind {
        "Pod" => tree.get("metadata"),
        "Deployment" | "StatefulSet" | "DaemonSet" | "Job" | "ReplicaSet" => {
            tree.get("spec")?.get("template")?.get("metadata")
        }
        "CronJob" => tree
            .get("spec")?
            .get("jobTemplate")?
            .get("spec")?
            .get("template")?
            .get("metadata"),
        _ => None,
    }
}

/// Returns the pod spec of a workload document.
pub fn pod_spec<'a>(tree: &'a Value, kind: &str) -> Option<&'a Value> {
    match kind {
        "Pod" => tree.get("spec"),
        "Deployment" | "StatefulSet" | "DaemonSet" | "Job" | "ReplicaSet" => {
            tree.get("spec")?.get("template")?.get("spec")
        }
        "CronJob" => tree
            .get("spec")?
            .get("jobTemplate")?
            .get("spec")?
            .get("template")?
            .get("spec"),
        _ => None,
    }
}

/// Mutable counterpart of [`pod_spec`].
pub fn pod_spec_mut<'a>(tree: &'a mut Value, kind: &str) -> Option<&'a mut Value> {
    match kind {
        "Pod" => tree.get_mut("spec"),
        "Deployment" | "StatefulSet" | "DaemonSet" | "Job" | "ReplicaSet" => {
            tree.get_mut("spec")?.get_mut("template")?.get_mut("spec")
        }
        "CronJob" => tree
            .get_mut("spec")?
            .get_mut("jobTemplate")?
            .get_mut("spec")?
            .get_mut("template")?
            .get_mut("spec"),
        _ => None,
    }
}
