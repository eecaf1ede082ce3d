//! Chart mining: hub search, archive caching, rendering and eligibility
//! filtering.

mod cache;
mod hub;
mod render;

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{parse_manifests, ManifestSet};

pub use cache::{fetch_chart, sha256_hex, ARCHIVE_FILE, PRERENDERED_FILE};
pub use hub::{ChartSource, HubClient, LocalHub, SearchOptions, DEFAULT_HUB_URL, HUB_URL_ENV};
pub use render::{render_chart, Renderer};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("transport error for {url}: {message}")]
    Transport { url: String, message: String },
    #[error("malformed hub response at offset {offset}: {message}")]
    Decode { offset: usize, message: String },
    #[error("chart {0} not found")]
    NotFound(ChartRef),
    #[error("integrity error for {chart}: cached digest {cached}, fetched {fetched}")]
    Integrity {
        chart: ChartRef,
        cached: String,
        fetched: String,
    },
    #[error("helm template failed: {stderr}")]
    Render { stderr: String },
    #[error("environment error: {0}")]
    Environment(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CatalogError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, CatalogError::Transport { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CatalogError::Io {
            path: path.into(),
            source,
        }
    }
}

/// A chart version listed on the hub.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct ChartRef {
    pub name: String,
    pub repository: String,
    pub version: String,
    pub stars: u64,
    pub package_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_url: Option<String>,
}

impl ChartRef {
    /// `(repository, name, version)`, unique within a catalog.
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.repository, &self.name, &self.version)
    }

    /// Filesystem-safe `repository_name_version` label.
    pub fn slug(&self) -> String {
        [&self.repository, &self.name, &self.version]
            .iter()
            .map(|s| {
                s.chars()
                    .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join("_")
    }
}

impl std::fmt::Display for ChartRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}@{}", self.repository, self.name, self.version)
    }
}

/// A downloaded chart archive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartPackage {
    pub chart: ChartRef,
    pub archive_path: PathBuf,
    pub content_digest: String,
}

impl ChartPackage {
    pub fn package_dir(&self) -> PathBuf {
        self.archive_path
            .parent()
            .map(PathBuf::from)
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedManifest {
    pub chart: ChartRef,
    pub text: String,
    pub line_count: usize,
    pub container_count: usize,
}

impl RenderedManifest {
    pub fn new(chart: ChartRef, text: String) -> Self {
        let container_count = parse_manifests(&text).container_count();
        Self {
            chart,
            line_count: text.lines().count(),
            container_count,
            text,
        }
    }
}

/// Keeps the first package for every content digest, in input order.
pub fn dedupe(catalog: Vec<ChartPackage>) -> Vec<ChartPackage> {
    let mut seen = HashSet::new();
    catalog
        .into_iter()
        .filter(|p| seen.insert(p.content_digest.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    Duplicate,
    RenderFailure,
    YamlSyntaxError,
    AllToolsFailed,
}

#[derive(Debug)]
pub struct Excluded {
    pub package: ChartPackage,
    pub reason: ExclusionReason,
    pub detail: String,
}

#[derive(Debug)]
pub struct EligibleChart {
    pub package: ChartPackage,
    pub manifest: RenderedManifest,
    pub parsed: ManifestSet,
}

#[derive(Debug, Default)]
pub struct Eligibility {
    pub eligible: Vec<EligibleChart>,
    pub excluded: Vec<Excluded>,
}

/// Splits rendered charts into eligible and excluded ones.
///
/// `analyzable` is consulted last, only for charts that rendered and parsed;
/// it returns `false` when every analyzer that was attempted on the chart
/// failed. Size is never a reason for exclusion.
pub fn filter_ineligible<F>(
    catalog: Vec<(ChartPackage, Result<RenderedManifest, CatalogError>)>,
    mut analyzable: F,
) -> Eligibility
where
    F: FnMut(&ChartPackage, &ManifestSet) -> bool,
{
    let mut out = Eligibility::default();
    let mut seen = HashSet::new();
    for (package, render) in catalog {
        if !seen.insert(package.content_digest.clone()) {
            out.excluded.push(Excluded {
                detail: format!("same content digest as an earlier chart ({})", package.content_digest),
                package,
                reason: ExclusionReason::Duplicate,
            });
            continue;
        }
        let manifest = match render {
            Ok(m) => m,
            Err(err) => {
                out.excluded.push(Excluded {
                    package,
                    reason: ExclusionReason::RenderFailure,
                    detail: err.to_string(),
                });
                continue;
            }
        };
        let parsed = parse_manifests(&manifest.text);
        if let Some(err) = parsed.errors.first() {
            out.excluded.push(Excluded {
                package,
                reason: ExclusionReason::YamlSyntaxError,
                detail: err.message.clone(),
            });
            continue;
        }
        if !analyzable(&package, &parsed) {
            out.excluded.push(Excluded {
                package,
                reason: ExclusionReason::AllToolsFailed,
                detail: "every analyzer failed on this chart".into(),
            });
            continue;
        }
        out.eligible.push(EligibleChart {
            package,
            manifest,
            parsed,
        });
    }
    out
}

/// One row of `catalog.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogRecord {
    #[serde(flatten)]
    pub chart: ChartRef,
    pub content_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container_count: Option<usize>,
    pub excluded: Option<ExclusionReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Eligibility {
    /// Rows for `catalog.json`: eligible charts first, then exclusions.
    pub fn records(&self) -> Vec<CatalogRecord> {
        let eligible = self.eligible.iter().map(|e| CatalogRecord {
            chart: e.package.chart.clone(),
            content_digest: e.package.content_digest.clone(),
            line_count: Some(e.manifest.line_count),
            container_count: Some(e.manifest.container_count),
            excluded: None,
            detail: None,
        });
        let excluded = self.excluded.iter().map(|x| CatalogRecord {
            chart: x.package.chart.clone(),
            content_digest: x.package.content_digest.clone(),
            line_count: None,
            container_count: None,
            excluded: Some(x.reason),
            detail: Some(x.detail.clone()),
        });
        eligible.chain(excluded).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn package(name: &str, digest: &str) -> ChartPackage {
        ChartPackage {
            chart: ChartRef {
                name: name.into(),
                repository: "repo".into(),
                version: "1.0.0".into(),
                ..Default::default()
            },
            archive_path: PathBuf::from(format!("/cache/{name}.tgz")),
            content_digest: digest.into(),
        }
    }

    fn rendered(p: &ChartPackage, text: &str) -> Result<RenderedManifest, CatalogError> {
        Ok(RenderedManifest::new(p.chart.clone(), text.into()))
    }

    #[test]
    fn dedupe_without_repeats_is_identity() {
        let input = vec![package("a", "1"), package("b", "2")];
        assert_eq!(dedupe(input.clone()), input);
        assert!(dedupe(vec![]).is_empty());
    }

    #[test]
    fn dedupe_keeps_first_occurrence() {
        let input = vec![
            package("a", "1"),
            package("b", "2"),
            package("c", "1"),
            package("d", "3"),
            package("e", "4"),
        ];
        // brute force: a package survives iff no earlier package has its digest
        let expected: Vec<_> = input
            .iter()
            .enumerate()
            .filter(|(i, p)| !input[..*i].iter().any(|q| q.content_digest == p.content_digest))
            .map(|(_, p)| p.clone())
            .collect();
        let out = dedupe(input);
        assert_eq!(out.len(), 4);
        assert_eq!(out, expected);
        assert_eq!(out[0].chart.name, "a");
    }

    #[test]
    fn filter_reasons() {
        let ok = package("ok", "1");
        let dup = package("dup", "1");
        let broken = package("broken", "2");
        let failed = package("failed", "3");
        let tools_fail = package("tools", "4");
        let pod = "apiVersion: v1\nkind: Pod\nmetadata:\n  name: p\n";
        let input = vec![
            (ok.clone(), rendered(&ok, pod)),
            (dup.clone(), rendered(&dup, pod)),
            (broken.clone(), rendered(&broken, "kind: Pod\nmetadata: {name: p\n")),
            (failed.clone(), Err(CatalogError::Render { stderr: "boom".into() })),
            (tools_fail.clone(), rendered(&tools_fail, pod)),
        ];
        let out = filter_ineligible(input, |p, _| p.chart.name != "tools");
        assert_eq!(out.eligible.len() + out.excluded.len(), 5);
        assert_eq!(out.eligible.len(), 1);
        assert_eq!(out.eligible[0].package.chart.name, "ok");
        let reasons: Vec<_> = out.excluded.iter().map(|x| (x.package.chart.name.as_str(), x.reason)).collect();
        assert_eq!(
            reasons,
            [
                ("dup", ExclusionReason::Duplicate),
                ("broken", ExclusionReason::YamlSyntaxError),
                ("failed", ExclusionReason::RenderFailure),
                ("tools", ExclusionReason::AllToolsFailed),
            ]
        );
    }

    #[test]
    fn large_charts_are_not_excluded() {
        let p = package("big", "9");
        let doc = "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: c\ndata:\n  k: v\n";
        let text: String = (0..2000).map(|i| doc.replace("name: c", &format!("name: c{i}")) + "---\n").collect();
        let out = filter_ineligible(vec![(p.clone(), rendered(&p, &text))], |_, _| true);
        assert_eq!(out.eligible.len(), 1);
        assert!(out.eligible[0].manifest.line_count > 10_000);
    }

    #[test]
    fn rendered_manifest_counts() {
        let text = "apiVersion: v1\nkind: Pod\nmetadata:\n  name: p\nspec:\n  containers:\n  - name: a\n";
        let m = RenderedManifest::new(ChartRef::default(), text.into());
        assert_eq!(m.line_count, 7);
        assert_eq!(m.container_count, 1);
    }

    #[test]
    fn slug_is_filesystem_safe() {
        let c = ChartRef {
            name: "my chart".into(),
            repository: "a/b".into(),
            version: "1.0.0+x".into(),
            ..Default::default()
        };
        assert_eq!(c.slug(), "a_b_my_chart_1.0.0_x");
    }
}
