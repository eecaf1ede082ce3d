use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;

use super::{CatalogError, ChartRef};

/// Environment variable overriding the hub base URL.
pub const HUB_URL_ENV: &str = "CHART_SENTRY_HUB_URL";
pub const DEFAULT_HUB_URL: &str = "https://artifacthub.io";

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub page_size: usize,
    pub max_results: Option<usize>,
    /// Expand every listed package into all of its published versions.
    pub all_versions: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            page_size: 60,
            max_results: None,
            all_versions: false,
        }
    }
}

/// Where chart listings and archives come from.
pub trait ChartSource {
    fn search(&self, opts: &SearchOptions) -> Result<Vec<ChartRef>, CatalogError>;

    fn archive_bytes(&self, chart: &ChartRef) -> Result<Vec<u8>, CatalogError>;

    /// A manifest rendered ahead of time, shipped next to the archive.
    fn prerendered(&self, _chart: &ChartRef) -> Result<Option<String>, CatalogError> {
        Ok(None)
    }
}

#[derive(Debug, Deserialize)]
struct SearchPage {
    #[serde(default)]
    packages: Vec<HubPackage>,
}

#[derive(Debug, Deserialize)]
struct HubPackage {
    package_id: String,
    name: String,
    version: String,
    #[serde(default)]
    stars: u64,
    repository: HubRepository,
    #[serde(default)]
    content_url: Option<String>,
}

#[derive(Debug, Deserialize)]
struct HubRepository {
    name: String,
}

#[derive(Debug, Deserialize)]
struct PackageDetail {
    #[serde(default)]
    content_url: Option<String>,
    #[serde(default)]
    available_versions: Vec<AvailableVersion>,
}

#[derive(Debug, Deserialize)]
struct AvailableVersion {
    version: String,
}

impl From<HubPackage> for ChartRef {
    fn from(p: HubPackage) -> Self {
        ChartRef {
            name: p.name,
            repository: p.repository.name,
            version: p.version,
            stars: p.stars,
            package_id: p.package_id,
            content_url: p.content_url,
        }
    }
}

/// Stable sort by descending stars, dropping repeated
/// `(repository, name, version)` keys and truncating to `max`.
fn finish_listing(mut refs: Vec<ChartRef>, max: Option<usize>) -> Vec<ChartRef> {
    let mut seen = HashSet::new();
    refs.retain(|r| seen.insert((r.repository.clone(), r.name.clone(), r.version.clone())));
    refs.sort_by(|a, b| b.stars.cmp(&a.stars));
    if let Some(max) = max {
        refs.truncate(max);
    }
    refs
}

/// Client for the hub REST API.
#[derive(Debug, Clone)]
pub struct HubClient {
    base_url: String,
    http: Client,
}

impl HubClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let http = Client::builder()
            .timeout(Duration::from_secs(60))
            .user_agent(concat!("chart-sentry/", env!("CARGO_PKG_VERSION")))
            .build()
            .expect("http client");
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            http,
        }
    }

    /// Uses `CHART_SENTRY_HUB_URL` when set.
    pub fn from_env() -> Self {
        Self::new(std::env::var(HUB_URL_ENV).unwrap_or_else(|_| DEFAULT_HUB_URL.to_string()))
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Lists Helm charts in descending star order, paging until the hub runs
    /// out of results or `max_results` is reached.
    pub fn search_charts(
        &self,
        page_size: usize,
        max_results: Option<usize>,
    ) -> Result<Vec<ChartRef>, CatalogError> {
        self.search(&SearchOptions {
            page_size,
            max_results,
            all_versions: false,
        })
    }

    fn get(&self, url: &str) -> Result<reqwest::blocking::Response, CatalogError> {
        self.http.get(url).send().map_err(|e| CatalogError::Transport {
            url: url.to_string(),
            message: e.to_string(),
        })
    }

    fn fetch_page(&self, page_size: usize, offset: usize) -> Result<(Vec<HubPackage>, Option<usize>), CatalogError> {
        let url = format!(
            "{}/api/v1/packages/search?kind=0&limit={page_size}&offset={offset}",
            self.base_url
        );
        let resp = self.get(&url)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(CatalogError::Transport {
                url,
                message: format!("status {status}"),
            });
        }
        let total = resp
            .headers()
            .get("pagination-total-count")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok());
        let body = resp.text().map_err(|e| CatalogError::Transport {
            url: url.clone(),
            message: e.to_string(),
        })?;
        let page: SearchPage = serde_json::from_str(&body).map_err(|e| CatalogError::Decode {
            offset,
            message: e.to_string(),
        })?;
        Ok((page.packages, total))
    }

    fn detail(&self, chart: &ChartRef, with_version: bool) -> Result<PackageDetail, CatalogError> {
        let mut url = format!(
            "{}/api/v1/packages/helm/{}/{}",
            self.base_url, chart.repository, chart.name
        );
        if with_version {
            url.push('/');
            url.push_str(&chart.version);
        }
        let resp = self.get(&url)?;
        match resp.status() {
            StatusCode::NOT_FOUND | StatusCode::GONE => return Err(CatalogError::NotFound(chart.clone())),
            s if !s.is_success() => {
                return Err(CatalogError::Transport {
                    url,
                    message: format!("status {s}"),
                })
            }
            _ => {}
        }
        resp.json().map_err(|e| CatalogError::Decode {
            offset: 0,
            message: format!("package detail for {chart}: {e}"),
        })
    }
}

impl ChartSource for HubClient {
    fn search(&self, opts: &SearchOptions) -> Result<Vec<ChartRef>, CatalogError> {
        let page_size = opts.page_size.max(1);
        let mut refs: Vec<ChartRef> = Vec::new();
        let mut offset = 0;
        loop {
            let (packages, total) = self.fetch_page(page_size, offset)?;
            let received = packages.len();
            refs.extend(packages.into_iter().map(ChartRef::from));
            offset += received;
            let exhausted = received < page_size || total.is_some_and(|t| offset >= t);
            let capped = opts.max_results.is_some_and(|max| refs.len() >= max);
            if exhausted || capped {
                break;
            }
        }
        if opts.all_versions {
            let mut expanded = Vec::with_capacity(refs.len());
            for r in refs {
                let detail = self.detail(&r, false)?;
                if detail.available_versions.is_empty() {
                    expanded.push(r);
                    continue;
                }
                for v in detail.available_versions {
                    expanded.push(ChartRef {
                        version: v.version.clone(),
                        content_url: if v.version == r.version { r.content_url.clone() } else { None },
                        ..r.clone()
                    });
                }
            }
            refs = expanded;
        }
        Ok(finish_listing(refs, opts.max_results))
    }

    fn archive_bytes(&self, chart: &ChartRef) -> Result<Vec<u8>, CatalogError> {
        let url = match &chart.content_url {
            Some(u) => u.clone(),
            None => self
                .detail(chart, true)?
                .content_url
                .ok_or_else(|| CatalogError::NotFound(chart.clone()))?,
        };
        let resp = self.get(&url)?;
        match resp.status() {
            StatusCode::NOT_FOUND | StatusCode::GONE => Err(CatalogError::NotFound(chart.clone())),
            s if !s.is_success() => Err(CatalogError::Transport {
                url,
                message: format!("status {s}"),
            }),
            _ => resp
                .bytes()
                .map(|b| b.to_vec())
                .map_err(|e| CatalogError::Transport {
                    url,
                    message: e.to_string(),
                }),
        }
    }
}

/// A hub mirrored on disk, for offline runs.
///
/// Layout: `index.json` holds a search response body (`{"packages": [...]}`);
/// each listed chart has `<repository>/<name>-<version>.tgz` and optionally
/// `<repository>/<name>-<version>.rendered.yaml`.
#[derive(Debug, Clone)]
pub struct LocalHub {
    root: PathBuf,
}

impl LocalHub {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn file(&self, chart: &ChartRef, suffix: &str) -> PathBuf {
        self.root
            .join(&chart.repository)
            .join(format!("{}-{}{suffix}", chart.name, chart.version))
    }
}

impl ChartSource for LocalHub {
    fn search(&self, opts: &SearchOptions) -> Result<Vec<ChartRef>, CatalogError> {
        let path = self.root.join("index.json");
        let text = std::fs::read_to_string(&path).map_err(|e| CatalogError::io(&path, e))?;
        let page: SearchPage = serde_json::from_str(&text).map_err(|e| CatalogError::Decode {
            offset: 0,
            message: e.to_string(),
        })?;
        let refs = page.packages.into_iter().map(ChartRef::from).collect();
        Ok(finish_listing(refs, opts.max_results))
    }

    fn archive_bytes(&self, chart: &ChartRef) -> Result<Vec<u8>, CatalogError> {
        let path = self.file(chart, ".tgz");
        match std::fs::read(&path) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CatalogError::NotFound(chart.clone())),
            Err(e) => Err(CatalogError::io(path, e)),
        }
    }

    fn prerendered(&self, chart: &ChartRef) -> Result<Option<String>, CatalogError> {
        let path = self.file(chart, ".rendered.yaml");
        match std::fs::read_to_string(&path) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CatalogError::io(path, e)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(name: &str, stars: u64) -> ChartRef {
        ChartRef {
            name: name.into(),
            repository: "repo".into(),
            version: "1".into(),
            stars,
            ..Default::default()
        }
    }

    #[test]
    fn listing_is_star_ordered_and_unique() {
        let out = finish_listing(vec![r("a", 1), r("b", 5), r("a", 1), r("c", 5)], None);
        let names: Vec<_> = out.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["b", "c", "a"]);
        assert_eq!(finish_listing(vec![r("a", 1), r("b", 5)], Some(1))[0].name, "b");
    }
}
