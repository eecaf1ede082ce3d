use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use crate::process::{self, ProcessError};

use super::{CatalogError, ChartPackage, RenderedManifest, PRERENDERED_FILE};

/// Renders chart archives with `helm template`, or reads a manifest
/// rendered ahead of time from the package directory.
#[derive(Debug, Clone)]
pub struct Renderer {
    pub helm: PathBuf,
    pub timeout: Duration,
    /// Never invoke helm; only pre-rendered manifests are used.
    pub offline: bool,
}

impl Default for Renderer {
    fn default() -> Self {
        Self {
            helm: PathBuf::from("helm"),
            timeout: Duration::from_secs(300),
            offline: false,
        }
    }
}

impl Renderer {
    pub fn offline() -> Self {
        Self {
            offline: true,
            ..Self::default()
        }
    }

    /// Renders with default chart values unless `overrides` is non-empty.
    pub fn render(
        &self,
        package: &ChartPackage,
        overrides: &BTreeMap<String, String>,
    ) -> Result<RenderedManifest, CatalogError> {
        let prerendered = package.package_dir().join(PRERENDERED_FILE);
        if overrides.is_empty() && prerendered.is_file() {
            let text = std::fs::read_to_string(&prerendered).map_err(|e| CatalogError::io(&prerendered, e))?;
            return Ok(RenderedManifest::new(package.chart.clone(), text));
        }
        if self.offline {
            return Err(CatalogError::Environment(format!(
                "offline mode and no usable {} in {}",
                PRERENDERED_FILE,
                package.package_dir().display()
            )));
        }

        let mut args = vec![
            "template".to_string(),
            package.chart.name.clone(),
            package.archive_path.display().to_string(),
        ];
        for (key, value) in overrides {
            args.push("--set".into());
            args.push(format!("{key}={value}"));
        }
        let out = process::run(&self.helm, &args, None, self.timeout).map_err(|e| match e {
            ProcessError::NotFound(bin) => CatalogError::Environment(format!(
                "{bin} is not installed and {} has no {PRERENDERED_FILE}",
                package.package_dir().display()
            )),
            other => CatalogError::Render {
                stderr: other.to_string(),
            },
        })?;
        if !out.status.success() {
            return Err(CatalogError::Render { stderr: out.stderr });
        }
        Ok(RenderedManifest::new(package.chart.clone(), out.stdout))
    }
}

/// [`Renderer::render`] with the default renderer.
pub fn render_chart(
    package: &ChartPackage,
    values_overrides: Option<&BTreeMap<String, String>>,
) -> Result<RenderedManifest, CatalogError> {
    let empty = BTreeMap::new();
    Renderer::default().render(package, values_overrides.unwrap_or(&empty))
}
