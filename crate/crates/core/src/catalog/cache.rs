use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{CatalogError, ChartPackage, ChartRef, ChartSource};

pub const ARCHIVE_FILE: &str = "chart.tgz";
pub const PRERENDERED_FILE: &str = "rendered.yaml";
const DIGEST_FILE: &str = "chart.sha256";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), CatalogError> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(|e| CatalogError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CatalogError::io(path, e))
}

/// Downloads `chart` into `<cache_dir>/<repository>/<name>/<version>/`.
///
/// Re-fetching identical bytes leaves the cache untouched. Bytes whose digest
/// differs from the cached entry for the same chart version are rejected.
pub fn fetch_chart(
    source: &dyn ChartSource,
    chart: &ChartRef,
    cache_dir: &Path,
) -> Result<ChartPackage, CatalogError> {
    let dir = cache_dir
        .join(&chart.repository)
        .join(&chart.name)
        .join(&chart.version);
    let archive_path = dir.join(ARCHIVE_FILE);
    let digest_path = dir.join(DIGEST_FILE);

    let bytes = source.archive_bytes(chart)?;
    let digest = sha256_hex(&bytes);

    match fs::read_to_string(&digest_path) {
        Ok(cached) if cached.trim() == digest && archive_path.exists() => {}
        Ok(cached) if archive_path.exists() => {
            return Err(CatalogError::Integrity {
                chart: chart.clone(),
                cached: cached.trim().to_string(),
                fetched: digest,
            });
        }
        _ => {
            fs::create_dir_all(&dir).map_err(|e| CatalogError::io(&dir, e))?;
            write_atomically(&archive_path, &bytes)?;
            write_atomically(&digest_path, format!("{digest}\n").as_bytes())?;
        }
    }

    if let Some(text) = source.prerendered(chart)? {
        let path = dir.join(PRERENDERED_FILE);
        if fs::read_to_string(&path).ok().as_deref() != Some(text.as_str()) {
            write_atomically(&path, text.as_bytes())?;
        }
    }

    Ok(ChartPackage {
        chart: chart.clone(),
        archive_path,
        content_digest: digest,
    })
}
