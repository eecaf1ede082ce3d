//! Run directory layout, exclusive lock, stage markers and JSON-lines files.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{OrchestratorError, Stage};

pub const CATALOG: &str = "catalog.json";
pub const PACKAGES: &str = "packages.json";
pub const CONFIG: &str = "config.json";
pub const FINDINGS: &str = "findings.jsonl";
pub const QUARANTINED: &str = "quarantined.jsonl";
pub const TOOLS: &str = "tools.json";
pub const POLICY_MAP: &str = "policy_map.yaml";
pub const SAMPLE: &str = "validation_sample.json";
pub const ATTEMPTS: &str = "attempts.jsonl";
pub const AUDIT: &str = "llm_audit.jsonl";
pub const VERIFICATION: &str = "verification.jsonl";
pub const LABELS: &str = "labels.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_MD: &str = "report.md";
const LOCK: &str = "run.lock";

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> OrchestratorError {
    OrchestratorError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn create(root: impl Into<PathBuf>) -> Result<Self, OrchestratorError> {
        let dir = Self::new(root);
        fs::create_dir_all(dir.root.join("stages")).map_err(|e| io_err(&dir.root, e))?;
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn chart_dir(&self, slug: &str) -> PathBuf {
        self.root.join("charts").join(slug)
    }

    pub fn scan_record(&self, slug: &str, tool: crate::analysis::Tool) -> PathBuf {
        self.root.join("scan").join(slug).join(format!("{tool}.json"))
    }

    pub fn patched_manifest(&self, slug: &str) -> PathBuf {
        self.root.join("patched").join(slug).join("manifest.yaml")
    }

    fn marker(&self, stage: Stage) -> PathBuf {
        self.root.join("stages").join(format!("{}.done", stage.as_str()))
    }

    pub fn is_done(&self, stage: Stage) -> bool {
        self.marker(stage).is_file()
    }

    pub fn mark_done(&self, stage: Stage) -> Result<(), OrchestratorError> {
        write_atomically(&self.marker(stage), b"")
    }

    pub fn clear_from(&self, stage: Stage) -> Result<(), OrchestratorError> {
        for s in Stage::ALL.into_iter().filter(|s| *s >= stage) {
            let m = self.marker(s);
            if m.exists() {
                fs::remove_file(&m).map_err(|e| io_err(&m, e))?;
            }
        }
        Ok(())
    }

    pub fn lock(&self) -> Result<RunLock, OrchestratorError> {
        let path = self.root.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(OrchestratorError::Locked(path)),
            Err(e) => Err(io_err(&path, e)),
        }
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<T, OrchestratorError> {
        read_json(&self.path(name))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<(), OrchestratorError> {
        write_json(&self.path(name), value)
    }
}

/// Held while a process owns the run directory.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), OrchestratorError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, OrchestratorError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| OrchestratorError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), OrchestratorError> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    write_atomically(path, text.as_bytes())
}

/// Reads every record of a JSON-lines file; a missing file is empty. A
/// torn final line (from an interrupted append) is ignored.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, OrchestratorError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path, e)),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| io_err(path, e))?;
    let mut out = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) if i == last => tracing::warn!("{}: ignoring torn last line", path.display()),
            Err(e) => {
                return Err(OrchestratorError::Corrupt {
                    path: path.to_path_buf(),
                    message: format!("line {}: {e}", i + 1),
                })
            }
        }
    }
    Ok(out)
}

pub fn append_jsonl<T: Serialize>(path: &Path, record: &T) -> Result<(), OrchestratorError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let mut line = serde_json::to_string(record).expect("serializable");
    line.push('\n');
    drop_torn_tail(path).map_err(|e| io_err(path, e))?;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
    f.sync_data().map_err(|e| io_err(path, e))
}

/// Truncates a final line that lacks its newline.
fn drop_torn_tail(path: &Path) -> std::io::Result<()> {
    let mut bytes = Vec::new();
    match File::open(path) {
        Ok(mut f) => f.read_to_end(&mut bytes)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e),
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    OpenOptions::new().write(true).open(path)?.set_len(keep as u64)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), OrchestratorError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("serializable"));
        text.push('\n');
    }
    write_atomically(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::create(dir.path()).unwrap();
        let guard = run.lock().unwrap();
        assert!(matches!(run.lock(), Err(OrchestratorError::Locked(_))));
        drop(guard);
        assert!(run.lock().is_ok());
    }

    #[test]
    fn markers() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::create(dir.path()).unwrap();
        for s in Stage::ALL {
            run.mark_done(s).unwrap();
        }
        run.clear_from(Stage::Remediate).unwrap();
        assert!(run.is_done(Stage::Scan));
        assert!(!run.is_done(Stage::Remediate));
        assert!(!run.is_done(Stage::Report));
    }

    #[test]
    fn jsonl_tolerates_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        assert!(read_jsonl::<u32>(&path).unwrap().is_empty());
        append_jsonl(&path, &1u32).unwrap();
        append_jsonl(&path, &2u32).unwrap();
        fs::OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"trunc").unwrap();
        assert_eq!(read_jsonl::<u32>(&path).unwrap(), vec![1, 2]);
        append_jsonl(&path, &3u32).unwrap();
        assert_eq!(read_jsonl::<u32>(&path).unwrap(), vec![1, 2, 3]);
        fs::write(&path, "1\nnope\n3\n").unwrap();
        assert!(read_jsonl::<u32>(&path).is_err());
    }
}
