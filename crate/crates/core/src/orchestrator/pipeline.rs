//! Stage implementations and resumption.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::labels::{LabelStore, ValidationLabel};
use super::rundir::{self, append_jsonl, io_err, read_jsonl, write_atomically, write_jsonl, RunDir};
use super::{OrchestratorError, RunConfig, Stage};
use crate::analysis::{
    Analyzer, BuiltinAnalyzer, EquivalenceMap, ExternalAdapter, Finding, PolicyDescriptor, QuarantinedFinding,
    ScanTarget, Tool,
};
use crate::catalog::{
    fetch_chart, filter_ineligible, CatalogRecord, ChartPackage, ChartRef, ExclusionReason, Renderer, SearchOptions,
};
use crate::manifest::{parse_manifests, splice_resource, ManifestSet, ResourceDoc, ResourceId};
use crate::remediation::provider::{provider_from_id, ProviderSettings};
use crate::remediation::{AttemptInput, AuditLog, Outcome, RemediationAttempt, Remediator, RetryPolicy};
use crate::stats::{build_report, stratified_sample, ReportInput, RunMetadata, ToolStatus};

/// One line of `findings.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingRecord {
    pub id: String,
    pub tool: Tool,
    pub policy_id: String,
    pub canonical_key: String,
    pub api_version: String,
    pub kind: String,
    pub name: String,
    pub namespace: String,
    pub container: Option<String>,
    /// `repository/name@version`
    pub chart: String,
    pub severity: String,
    pub description: String,
}

impl FindingRecord {
    pub fn new(id: String, f: &Finding, map: &EquivalenceMap) -> Self {
        let canonical_key = f
            .policy
            .equivalence_class
            .clone()
            .unwrap_or_else(|| map.canonical_key(f.policy.tool, &f.policy.policy_id));
        Self {
            id,
            tool: f.policy.tool,
            policy_id: f.policy.policy_id.clone(),
            canonical_key,
            api_version: f.resource.api_version.clone(),
            kind: f.resource.kind.clone(),
            name: f.resource.name.clone(),
            namespace: f.resource.namespace.clone(),
            container: f.container.clone(),
            chart: f.chart.to_string(),
            severity: f.severity.clone(),
            description: f.policy.description.clone(),
        }
    }

    pub fn to_finding(&self, chart: &ChartRef) -> Finding {
        Finding {
            policy: PolicyDescriptor {
                tool: self.tool,
                policy_id: self.policy_id.clone(),
                description: self.description.clone(),
                equivalence_class: Some(self.canonical_key.clone()),
            },
            resource: ResourceId::new(&self.api_version, &self.kind, &self.name, &self.namespace),
            container: self.container.clone(),
            chart: chart.clone(),
            severity: self.severity.clone(),
        }
    }
}

/// Stable id of the `occurrence`-th finding with this key in its chart.
pub fn finding_id(f: &Finding, occurrence: usize) -> String {
    let r = &f.resource;
    let text = format!(
        "{}\n{}\n{}\n{}\n{}\n{}\n{}\n{}\n{occurrence}",
        f.chart,
        f.policy.tool,
        f.policy.policy_id,
        r.api_version,
        r.kind,
        r.namespace,
        r.name,
        f.container.as_deref().unwrap_or("")
    );
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStatus {
    Ran,
    Failed,
    Skipped,
}

/// Result of one tool on one chart, kept under `scan/` for resumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub status: ScanStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub findings: Vec<Finding>,
    pub quarantined: Vec<QuarantinedFinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationSample {
    pub seed: u64,
    pub finding_ids: Vec<String>,
}

/// Before/after counts of one tool on one patched chart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub chart: String,
    pub tool: Tool,
    pub status: ScanStatus,
    pub before: usize,
    pub after: usize,
    pub resolved: usize,
    pub introduced: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub executed: Vec<Stage>,
    pub skipped: Vec<Stage>,
}

/// Runs every stage not yet completed, through the report.
pub fn pipeline_run(config: &RunConfig) -> Result<RunSummary, OrchestratorError> {
    run_until(config, Stage::Report, None)
}

/// Runs `stage` again, after any prerequisites that are missing. Later
/// stages are invalidated.
pub fn run_stage(config: &RunConfig, stage: Stage) -> Result<RunSummary, OrchestratorError> {
    run_until(config, stage, Some(stage))
}

fn run_until(config: &RunConfig, target: Stage, redo: Option<Stage>) -> Result<RunSummary, OrchestratorError> {
    let run = RunDir::create(&config.run_dir)?;
    let _lock = run.lock()?;
    if let Some(old) = RunConfig::load(run.root())? {
        if let Some(stage) = config.invalidated_from(&old) {
            tracing::info!("configuration changed; redoing from {}", stage.as_str());
            run.clear_from(stage)?;
        }
    }
    run.write_json(rundir::CONFIG, config)?;
    if let Some(stage) = redo {
        run.clear_from(stage)?;
    }

    let mut summary = RunSummary::default();
    for stage in Stage::ALL.into_iter().filter(|s| *s <= target) {
        if run.is_done(stage) {
            summary.skipped.push(stage);
            continue;
        }
        tracing::info!("stage {}", stage.as_str());
        match stage {
            Stage::Mine => mine(config, &run)?,
            Stage::Render => render(config, &run)?,
            Stage::Scan => scan(config, &run)?,
            Stage::Remediate => remediate(config, &run)?,
            Stage::Verify => verify(config, &run)?,
            Stage::Report => report(config, &run)?,
        }
        run.mark_done(stage)?;
        summary.executed.push(stage);
    }
    Ok(summary)
}

fn mine(config: &RunConfig, run: &RunDir) -> Result<(), OrchestratorError> {
    let source = config.chart_source()?;
    let opts = SearchOptions {
        max_results: config.max_charts,
        ..SearchOptions::default()
    };
    let refs = source.search(&opts)?;
    let cache = config.cache_dir();
    let mut packages = Vec::with_capacity(refs.len());
    for chart in &refs {
        match fetch_chart(source.as_ref(), chart, &cache) {
            Ok(p) => packages.push(p),
            Err(e) if e.is_retriable() => return Err(e.into()),
            Err(e) => tracing::warn!("skipping {chart}: {e}"),
        }
    }
    tracing::info!("fetched {} of {} listed charts", packages.len(), refs.len());
    run.write_json(rundir::PACKAGES, &packages)
}

fn render(config: &RunConfig, run: &RunDir) -> Result<(), OrchestratorError> {
    let packages: Vec<ChartPackage> = run.read_json(rundir::PACKAGES)?;
    let renderer = Renderer {
        helm: config.helm.clone(),
        offline: config.offline,
        ..Renderer::default()
    };
    let no_overrides = BTreeMap::new();
    let rendered = packages
        .into_iter()
        .map(|p| {
            let r = renderer.render(&p, &no_overrides);
            (p, r)
        })
        .collect();
    let eligibility = filter_ineligible(rendered, |_, _| true);
    for e in &eligibility.eligible {
        let path = run.chart_dir(&e.package.chart.slug()).join("manifest.yaml");
        write_atomically(&path, e.manifest.text.as_bytes())?;
    }
    tracing::info!(
        "{} eligible, {} excluded",
        eligibility.eligible.len(),
        eligibility.excluded.len()
    );
    run.write_json(rundir::CATALOG, &eligibility.records())
}

fn analyzer_for(tool: Tool, config: &RunConfig, map: &EquivalenceMap) -> Box<dyn Analyzer> {
    match tool {
        Tool::Builtin => Box::new(BuiltinAnalyzer::default()),
        t => Box::new(
            ExternalAdapter {
                policy_map: Some(map.clone()),
                ..ExternalAdapter::new(t)
            }
            .with_timeout(Duration::from_secs(config.tool_timeout_secs)),
        ),
    }
}

fn read_manifest(path: &Path) -> Result<ManifestSet, OrchestratorError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(parse_manifests(&text))
}

fn scan_chart(
    analyzer: &dyn Analyzer,
    chart: &ChartRef,
    set: &ManifestSet,
    manifest_path: &Path,
    raw_dir: &Path,
) -> ScanRecord {
    let target = ScanTarget {
        chart,
        manifest: set,
        manifest_path,
        raw_dir,
    };
    match analyzer.analyze(&target) {
        Ok(out) => ScanRecord {
            status: ScanStatus::Ran,
            error: None,
            findings: out.findings,
            quarantined: out.quarantined,
        },
        Err(e) => ScanRecord {
            status: if e.is_skip() { ScanStatus::Skipped } else { ScanStatus::Failed },
            error: Some(e.to_string()),
            findings: Vec::new(),
            quarantined: Vec::new(),
        },
    }
}

fn scan(config: &RunConfig, run: &RunDir) -> Result<(), OrchestratorError> {
    let mut catalog: Vec<CatalogRecord> = run.read_json(rundir::CATALOG)?;
    let map = EquivalenceMap::bundled();
    write_atomically(&run.path(rundir::POLICY_MAP), map.to_yaml().as_bytes())?;

    let mut statuses = BTreeMap::new();
    let mut analyzers = Vec::new();
    for tool in config.selected_tools() {
        let analyzer = analyzer_for(tool, config, &map);
        match analyzer.version() {
            Ok(v) => {
                statuses.insert(tool, ToolStatus { status: "ran".into(), version: Some(v), detail: None });
                analyzers.push(analyzer);
            }
            Err(e) if e.is_skip() => {
                tracing::warn!("{e}; skipping {tool}");
                statuses.insert(tool, ToolStatus { status: "skipped".into(), version: None, detail: Some(e.to_string()) });
            }
            Err(e) => {
                statuses.insert(tool, ToolStatus { status: "ran".into(), version: None, detail: Some(e.to_string()) });
                analyzers.push(analyzer);
            }
        }
    }

    let mut findings = Vec::new();
    let mut quarantined = Vec::new();
    let mut failures: BTreeMap<Tool, (usize, Option<String>)> = BTreeMap::new();
    let mut charts_scanned = 0;
    for record in catalog.iter_mut().filter(|r| r.excluded.is_none()) {
        let slug = record.chart.slug();
        let manifest_path = run.chart_dir(&slug).join("manifest.yaml");
        let set = read_manifest(&manifest_path)?;
        let (mut attempted, mut failed) = (0, 0);
        let mut chart_findings = Vec::new();
        for analyzer in &analyzers {
            let tool = analyzer.tool();
            let path = run.scan_record(&slug, tool);
            let result: ScanRecord = if path.is_file() {
                rundir::read_json(&path)?
            } else {
                let raw_dir = run.root().join("scan").join(&slug).join("raw").join(tool.as_str());
                let r = scan_chart(analyzer.as_ref(), &record.chart, &set, &manifest_path, &raw_dir);
                rundir::write_json(&path, &r)?;
                r
            };
            match result.status {
                ScanStatus::Skipped => continue,
                ScanStatus::Failed => {
                    failed += 1;
                    let entry = failures.entry(tool).or_default();
                    entry.0 += 1;
                    entry.1.get_or_insert_with(|| result.error.clone().unwrap_or_default());
                    tracing::warn!("{tool} failed on {}: {}", record.chart, result.error.as_deref().unwrap_or(""));
                }
                ScanStatus::Ran => {}
            }
            attempted += 1;
            chart_findings.extend(result.findings);
            quarantined.extend(result.quarantined);
        }
        if attempted > 0 && failed == attempted {
            record.excluded = Some(ExclusionReason::AllToolsFailed);
            record.detail = Some("every analyzer failed on this chart".into());
            quarantined.retain(|q: &QuarantinedFinding| q.chart != record.chart);
            continue;
        }
        charts_scanned += 1;
        findings.extend(chart_findings);
    }
    for (tool, (count, detail)) in failures {
        if count >= charts_scanned.max(1) {
            statuses.insert(tool, ToolStatus { status: "failed".into(), version: None, detail });
        }
    }

    let mut occurrences: BTreeMap<String, usize> = BTreeMap::new();
    let records: Vec<FindingRecord> = findings
        .iter()
        .map(|f| {
            let n = occurrences.entry(finding_id(f, 0)).or_default();
            let id = finding_id(f, *n);
            *n += 1;
            FindingRecord::new(id, f, &map)
        })
        .collect();
    write_jsonl(&run.path(rundir::FINDINGS), &records)?;
    write_jsonl(&run.path(rundir::QUARANTINED), &quarantined)?;
    run.write_json(rundir::TOOLS, &statuses)?;
    run.write_json(rundir::CATALOG, &catalog)?;

    let size = config.sample_size.min(records.len());
    if size < config.sample_size {
        tracing::warn!("sample size {} exceeds the {} findings; sampling all", config.sample_size, records.len());
    }
    let finding_ids: Vec<String> = stratified_sample(&findings, size, config.seed, Finding::tool)?
        .into_iter()
        .map(|i| records[i].id.clone())
        .collect();
    tracing::info!("{} findings, {} sampled for review", records.len(), finding_ids.len());
    run.write_json(rundir::SAMPLE, &ValidationSample { seed: config.seed, finding_ids })
}

fn charts_by_display(run: &RunDir) -> Result<BTreeMap<String, ChartRef>, OrchestratorError> {
    let catalog: Vec<CatalogRecord> = run.read_json(rundir::CATALOG)?;
    Ok(catalog.into_iter().map(|r| (r.chart.to_string(), r.chart)).collect())
}

/// `findings.jsonl` with each record's finding rebuilt.
pub fn load_findings(run_dir: &Path) -> Result<Vec<(FindingRecord, Finding)>, OrchestratorError> {
    let run = RunDir::new(run_dir);
    let charts = charts_by_display(&run)?;
    let records: Vec<FindingRecord> = read_jsonl(&run.path(rundir::FINDINGS))?;
    records
        .into_iter()
        .map(|r| {
            let chart = charts.get(&r.chart).ok_or_else(|| OrchestratorError::Corrupt {
                path: run.path(rundir::FINDINGS),
                message: format!("finding {} names chart {} which is not in the catalog", r.id, r.chart),
            })?;
            let f = r.to_finding(chart);
            Ok((r, f))
        })
        .collect()
}

/// Findings grouped by chart, keeping first-seen chart order.
fn group_by_chart(findings: Vec<(FindingRecord, Finding)>) -> Vec<(ChartRef, Vec<(FindingRecord, Finding)>)> {
    let mut groups: Vec<(ChartRef, Vec<(FindingRecord, Finding)>)> = Vec::new();
    for (r, f) in findings {
        match groups.iter_mut().find(|(c, _)| *c == f.chart) {
            Some((_, items)) => items.push((r, f)),
            None => groups.push((f.chart.clone(), vec![(r, f)])),
        }
    }
    groups
}

fn remediate(config: &RunConfig, run: &RunDir) -> Result<(), OrchestratorError> {
    if config.skip_llm {
        tracing::info!("LLM remediation disabled");
        return Ok(());
    }
    let settings = match &config.provider_config {
        Some(path) => ProviderSettings::load(path)?,
        None => ProviderSettings::default(),
    };
    let provider = provider_from_id(&config.provider, &settings)?;
    let audit_path = run.path(rundir::AUDIT);
    let audit = AuditLog::open(&audit_path).map_err(|e| io_err(&audit_path, e))?;
    let remediator = Remediator {
        retry: RetryPolicy {
            retries: config.llm_retries,
            ..RetryPolicy::default()
        },
        audit: Some(&audit),
        ..Remediator::new(provider.as_ref())
    };

    let attempts_path = run.path(rundir::ATTEMPTS);
    let done: BTreeMap<String, RemediationAttempt> = read_jsonl::<RemediationAttempt>(&attempts_path)?
        .into_iter()
        .map(|a| (a.finding_id.clone(), a))
        .collect();
    let map = EquivalenceMap::bundled();
    let mut analyzers: BTreeMap<Tool, Box<dyn Analyzer>> = BTreeMap::new();

    for (chart, items) in group_by_chart(load_findings(run.root())?) {
        let slug = chart.slug();
        let mut current = read_manifest(&run.chart_dir(&slug).join("manifest.yaml"))?;
        let mut baseline: BTreeMap<Tool, Vec<Finding>> = BTreeMap::new();
        for (_, f) in &items {
            baseline.entry(f.tool()).or_default().push(f.clone());
        }
        for (record, finding) in &items {
            let tool = finding.tool();
            let attempt = match done.get(&record.id) {
                Some(a) => a.clone(),
                None => {
                    let analyzer = analyzers
                        .entry(tool)
                        .or_insert_with(|| analyzer_for(tool, config, &map));
                    let work_dir = run.root().join("attempts").join(&record.id);
                    let input = AttemptInput {
                        finding_id: &record.id,
                        finding,
                        current: &current,
                        baseline: &baseline[&tool],
                        analyzer: analyzer.as_ref(),
                        work_dir: &work_dir,
                        policy_key: Some(record.canonical_key.clone()),
                    };
                    let (attempt, _) = remediator.attempt(&input)?;
                    append_jsonl(&attempts_path, &attempt)?;
                    attempt
                }
            };
            if attempt.outcome != Some(Outcome::Correct) {
                continue;
            }
            let text = attempt.extracted.as_deref().unwrap_or_default();
            let doc = ResourceDoc::from_text(text)?;
            current = splice_resource(&current, &finding.resource, &doc)?;
            let tool_baseline = baseline.entry(tool).or_default();
            tool_baseline.retain(|b| b.resource != finding.resource);
            tool_baseline.extend(attempt.post_findings.iter().cloned());
        }
        write_atomically(&run.patched_manifest(&slug), current.source_text().as_bytes())?;
    }
    Ok(())
}

fn verify(config: &RunConfig, run: &RunDir) -> Result<(), OrchestratorError> {
    let tools: BTreeMap<Tool, ToolStatus> = run.read_json(rundir::TOOLS)?;
    let map = EquivalenceMap::bundled();
    let mut out = Vec::new();
    for (chart, items) in group_by_chart(load_findings(run.root())?) {
        let slug = chart.slug();
        let patched_path = run.patched_manifest(&slug);
        let Ok(patched_text) = std::fs::read_to_string(&patched_path) else {
            continue;
        };
        let original = read_manifest(&run.chart_dir(&slug).join("manifest.yaml"))?;
        if original.source_text() == patched_text {
            continue;
        }
        let patched = parse_manifests(&patched_text);
        for (tool, status) in &tools {
            if status.status != "ran" {
                continue;
            }
            let before: BTreeSet<_> = items.iter().filter(|(_, f)| f.tool() == *tool).map(|(_, f)| f.key()).collect();
            let raw_dir = run.root().join("verify").join(&slug).join(tool.as_str());
            let analyzer = analyzer_for(*tool, config, &map);
            let result = scan_chart(analyzer.as_ref(), &chart, &patched, &patched_path, &raw_dir);
            let after: BTreeSet<_> = result.findings.iter().map(Finding::key).collect();
            out.push(VerificationRecord {
                chart: chart.to_string(),
                tool: *tool,
                status: result.status,
                before: before.len(),
                after: after.len(),
                resolved: before.difference(&after).count(),
                introduced: after.difference(&before).count(),
                error: result.error,
            });
        }
    }
    write_jsonl(&run.path(rundir::VERIFICATION), &out)
}

/// The label store of a scanned run.
pub fn label_store(run_dir: &Path) -> Result<LabelStore, OrchestratorError> {
    let run = RunDir::new(run_dir);
    let records: Vec<FindingRecord> = read_jsonl(&run.path(rundir::FINDINGS))?;
    let sample: ValidationSample = run.read_json(rundir::SAMPLE)?;
    Ok(LabelStore::new(
        run.path(rundir::LABELS),
        records.into_iter().map(|r| r.id).collect(),
        sample.finding_ids.into_iter().collect(),
    ))
}

/// Validates and appends one manual label.
pub fn record_label(run_dir: &Path, label: ValidationLabel) -> Result<ValidationLabel, OrchestratorError> {
    label_store(run_dir)?.record(label)
}

fn report(config: &RunConfig, run: &RunDir) -> Result<(), OrchestratorError> {
    let catalog: Vec<CatalogRecord> = run.read_json(rundir::CATALOG)?;
    let tools: BTreeMap<Tool, ToolStatus> = run.read_json(rundir::TOOLS)?;
    let pairs = load_findings(run.root())?;
    let ids: BTreeSet<&str> = pairs.iter().map(|(r, _)| r.id.as_str()).collect();
    let findings: Vec<Finding> = pairs.iter().map(|(_, f)| f.clone()).collect();
    let quarantined: Vec<QuarantinedFinding> = read_jsonl(&run.path(rundir::QUARANTINED))?;
    let attempts: Vec<RemediationAttempt> = if config.skip_llm {
        Vec::new()
    } else {
        read_jsonl::<RemediationAttempt>(&run.path(rundir::ATTEMPTS))?
            .into_iter()
            .filter(|a| ids.contains(a.finding_id.as_str()))
            .collect()
    };
    let validation = label_store(run.root())?.counts()?;

    let mut charts_excluded = BTreeMap::new();
    for reason in catalog.iter().filter_map(|r| r.excluded) {
        let name = serde_json::to_value(reason).expect("serializable");
        *charts_excluded.entry(name.as_str().unwrap_or_default().to_string()).or_default() += 1;
    }
    let (provider, model) = match attempts.first() {
        _ if config.skip_llm => (None, None),
        Some(a) => (Some(a.provider_id.clone()), Some(a.model.clone())),
        None => (Some(config.provider.clone()), None),
    };
    let metadata = RunMetadata {
        seed: config.seed,
        confidence: config.confidence,
        z: config.z()?,
        sample_size: config.sample_size,
        provider,
        model,
        tools,
        charts_eligible: catalog.iter().filter(|r| r.excluded.is_none()).count(),
        charts_excluded,
    };
    let map = EquivalenceMap::bundled();
    let report = build_report(ReportInput {
        metadata,
        findings: &findings,
        quarantined: &quarantined,
        attempts: &attempts,
        validation,
        map: &map,
    })?;
    write_atomically(&run.path(rundir::REPORT_JSON), report.to_json().as_bytes())?;
    write_atomically(&run.path(rundir::REPORT_CSV), report.to_csv().as_bytes())?;
    write_atomically(&run.path(rundir::REPORT_MD), report.to_markdown().as_bytes())
}
