//! Invocation and report parsing for the external scanners.
//!
//! | tool        | command                                                           | report            | "violations found" exit codes |
//! |-------------|-------------------------------------------------------------------|-------------------|-------------------------------|
//! | checkov     | `checkov -d <dir> --framework kubernetes -o json`                 | stdout            | 1                             |
//! | datree      | `datree test <file> --output json --no-record`                    | stdout            | 1, 2                          |
//! | kics        | `kics scan -p <file> --report-formats json -o <raw> --output-name kics` | `<raw>/kics.json` | 20, 30, 40, 50, 60     |
//! | kube-linter | `kube-linter lint <file> --format json`                           | stdout            | 1                             |
//! | kubeaudit   | `kubeaudit all -f <file> -p json`                                 | stdout (JSON lines) | 2                           |
//! | kubescape   | `kubescape scan <file> --format json --output <raw>/kubescape.json` | file            | 1                             |
//! | terrascan   | `terrascan scan -i k8s -f <file> -o json`                         | stdout            | 3                             |

mod checkov;
mod datree;
mod kics;
mod kube_linter;
mod kubeaudit;
mod kubescape;
mod terrascan;

use std::path::{Path, PathBuf};
use std::time::Duration;

use super::{Analyzer, AnalysisError, EquivalenceMap, PolicyDescriptor, RawFinding, ScanOutput, ScanTarget, Tool};
use crate::process::{self, ProcessError};

/// Parses a tool-native report. No findings are returned unless the whole
/// report decodes.
pub fn parse_report(tool: Tool, report: &str) -> Result<Vec<RawFinding>, String> {
    let raw = match tool {
        Tool::Builtin => return Err("the built-in analyzer has no report format".into()),
        Tool::Checkov => checkov::parse(report),
        Tool::Datree => datree::parse(report),
        Tool::Kics => kics::parse(report),
        Tool::KubeLinter => kube_linter::parse(report),
        Tool::Kubeaudit => kubeaudit::parse(report),
        Tool::Kubescape => kubescape::parse(report),
        Tool::Terrascan => terrascan::parse(report),
    }?;
    Ok(raw)
}

pub(crate) fn descriptor(tool: Tool, policy_id: &str, description: &str) -> PolicyDescriptor {
    PolicyDescriptor {
        tool,
        policy_id: policy_id.to_string(),
        description: description.trim().to_string(),
        equivalence_class: None,
    }
}

/// Treats blank reports as "nothing found" and otherwise decodes JSON.
pub(crate) fn decode<T: serde::de::DeserializeOwned + Default>(report: &str) -> Result<T, String> {
    if report.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(report).map_err(|e| e.to_string())
}

enum ReportLocation {
    Stdout,
    File(PathBuf),
}

/// Runs one external scanner as a subprocess.
#[derive(Debug, Clone)]
pub struct ExternalAdapter {
    pub tool: Tool,
    pub binary: PathBuf,
    pub timeout: Duration,
    pub policy_map: Option<EquivalenceMap>,
}

impl ExternalAdapter {
    pub fn new(tool: Tool) -> Self {
        assert_ne!(tool, Tool::Builtin, "the built-in analyzer is not a subprocess");
        Self {
            tool,
            binary: PathBuf::from(tool.as_str()),
            timeout: Duration::from_secs(600),
            policy_map: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_binary(mut self, binary: impl Into<PathBuf>) -> Self {
        self.binary = binary.into();
        self
    }

    fn invocation(&self, manifest: &Path, raw_dir: &Path) -> (Vec<String>, ReportLocation) {
        let file = manifest.display().to_string();
        let dir = manifest
            .parent()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| ".".into());
        let args = |a: &[&str]| a.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        match self.tool {
            Tool::Checkov => (
                args(&["-d", &dir, "--framework", "kubernetes", "-o", "json"]),
                ReportLocation::Stdout,
            ),
            Tool::Datree => (
                args(&["test", &file, "--output", "json", "--no-record"]),
                ReportLocation::Stdout,
            ),
            Tool::Kics => {
                let out = raw_dir.display().to_string();
                (
                    args(&["scan", "-p", &file, "--report-formats", "json", "-o", &out, "--output-name", "kics"]),
                    ReportLocation::File(raw_dir.join("kics.json")),
                )
            }
            Tool::KubeLinter => (args(&["lint", &file, "--format", "json"]), ReportLocation::Stdout),
            Tool::Kubeaudit => (args(&["all", "-f", &file, "-p", "json"]), ReportLocation::Stdout),
            Tool::Kubescape => {
                let out = raw_dir.join("kubescape.json");
                (
                    args(&["scan", &file, "--format", "json", "--output", &out.display().to_string()]),
                    ReportLocation::File(out),
                )
            }
            Tool::Terrascan => (args(&["scan", "-i", "k8s", "-f", &file, "-o", "json"]), ReportLocation::Stdout),
            Tool::Builtin => unreachable!(),
        }
    }

    fn violation_codes(&self) -> &'static [i32] {
        match self.tool {
            Tool::Checkov | Tool::KubeLinter | Tool::Kubescape => &[1],
            Tool::Datree => &[1, 2],
            Tool::Kics => &[20, 30, 40, 50, 60],
            Tool::Kubeaudit => &[2],
            Tool::Terrascan => &[3],
            Tool::Builtin => &[],
        }
    }

    fn version_args(&self) -> Vec<String> {
        match self.tool {
            Tool::Checkov => vec!["--version".into()],
            _ => vec!["version".into()],
        }
    }

    fn run_process(&self, args: &[String]) -> Result<process::ProcessOutput, AnalysisError> {
        process::run(&self.binary, args, None, self.timeout).map_err(|e| match e {
            ProcessError::NotFound(_) => AnalysisError::ToolUnavailable(self.tool),
            ProcessError::Timeout { timeout, .. } => AnalysisError::ToolTimeout {
                tool: self.tool,
                seconds: timeout.as_secs(),
            },
            ProcessError::Io { source, .. } => AnalysisError::Io(source),
        })
    }
}

impl Analyzer for ExternalAdapter {
    fn tool(&self) -> Tool {
        self.tool
    }

    fn version(&self) -> Result<String, AnalysisError> {
        let out = self.run_process(&self.version_args())?;
        let text = if out.stdout.trim().is_empty() { out.stderr } else { out.stdout };
        Ok(text.lines().next().unwrap_or_default().trim().to_string())
    }

    fn analyze(&self, target: &ScanTarget<'_>) -> Result<ScanOutput, AnalysisError> {
        std::fs::create_dir_all(target.raw_dir)?;
        let (args, location) = self.invocation(target.manifest_path, target.raw_dir);
        let out = self.run_process(&args)?;
        let code = out.code();
        let ok = code == Some(0) || code.is_some_and(|c| self.violation_codes().contains(&c));
        if !ok {
            return Err(AnalysisError::Exec {
                tool: self.tool,
                status: code.map_or_else(|| "signal".to_string(), |c| c.to_string()),
                stderr: out.stderr,
            });
        }
        let (report, raw_path) = match location {
            ReportLocation::Stdout => {
                let path = target.raw_dir.join(format!("{}.out", self.tool));
                std::fs::write(&path, &out.stdout)?;
                (out.stdout, path)
            }
            ReportLocation::File(path) => (std::fs::read_to_string(&path).unwrap_or_default(), path),
        };
        let raw = parse_report(self.tool, &report).map_err(|message| AnalysisError::Decode {
            tool: self.tool,
            raw_output: raw_path,
            message,
        })?;
        let mut output = ScanOutput::resolve(raw, target.manifest, target.chart);
        if let Some(map) = &self.policy_map {
            map.annotate(&mut output.findings);
        }
        Ok(output)
    }
}

/// Runs `tool` once on `target`.
pub fn run_adapter(tool: Tool, target: &ScanTarget<'_>, timeout: Duration) -> Result<ScanOutput, AnalysisError> {
    ExternalAdapter::new(tool).with_timeout(timeout).analyze(target)
}
