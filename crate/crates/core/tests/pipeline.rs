mod common;

use std::fs;

use chart_sentry::orchestrator::{
    load_findings, pipeline_run, record_label, run_stage, OrchestratorError, RunConfig, RunDir, Stage, ToolVerdict,
    ValidationLabel, ValidationSample,
};

fn golden() -> String {
    fs::read_to_string(common::fixture(common::GOLDEN_REPORT)).unwrap()
}

fn fresh_run() -> (tempfile::TempDir, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    let config = common::golden_config(&dir.path().join("run"));
    pipeline_run(&config).unwrap();
    (dir, config)
}

#[test]
fn interrupted_remediation_resumes_to_the_same_report() {
    let (_dir, config) = fresh_run();
    let run = &config.run_dir;
    let attempts = fs::read_to_string(run.join("attempts.jsonl")).unwrap();
    let lines: Vec<&str> = attempts.lines().collect();
    assert_eq!(lines.len(), 20);

    // crash mid-append: seven whole records and half of the eighth
    let mut torn: String = lines[..7].iter().map(|l| format!("{l}\n")).collect();
    torn.push_str(&lines[7][..lines[7].len() / 2]);
    fs::write(run.join("attempts.jsonl"), torn).unwrap();
    RunDir::new(run).clear_from(Stage::Remediate).unwrap();
    fs::remove_file(run.join("report.json")).unwrap();

    let summary = pipeline_run(&config).unwrap();
    assert_eq!(summary.executed, [Stage::Remediate, Stage::Verify, Stage::Report]);
    assert_eq!(fs::read_to_string(run.join("report.json")).unwrap(), golden());
    let resumed = fs::read_to_string(run.join("attempts.jsonl")).unwrap();
    assert_eq!(resumed.lines().count(), 20);
    assert!(resumed.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn changed_confidence_only_redoes_the_report() {
    let (_dir, mut config) = fresh_run();
    config.confidence = 0.99;
    let summary = pipeline_run(&config).unwrap();
    assert_eq!(summary.executed, [Stage::Report]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(config.run_dir.join("report.json")).unwrap()).unwrap();
    let z = report["run"]["z"].as_f64().unwrap();
    assert!((z - 2.5758).abs() < 1e-3, "{z}");
}

#[test]
fn explicit_stage_reruns_it_and_invalidates_later_stages() {
    let (_dir, config) = fresh_run();
    let before = fs::read_to_string(config.run_dir.join("findings.jsonl")).unwrap();
    let summary = run_stage(&config, Stage::Scan).unwrap();
    assert_eq!(summary.executed, [Stage::Scan]);
    assert_eq!(fs::read_to_string(config.run_dir.join("findings.jsonl")).unwrap(), before);
    let run = RunDir::new(&config.run_dir);
    assert!(!run.is_done(Stage::Remediate) && !run.is_done(Stage::Report));
    let summary = pipeline_run(&config).unwrap();
    assert_eq!(summary.executed, [Stage::Remediate, Stage::Verify, Stage::Report]);
    assert_eq!(fs::read_to_string(config.run_dir.join("report.json")).unwrap(), golden());
}

#[test]
fn a_locked_run_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::golden_config(&dir.path().join("run"));
    let run = RunDir::create(&config.run_dir).unwrap();
    let lock = run.lock().unwrap();
    assert!(matches!(pipeline_run(&config), Err(OrchestratorError::Locked(_))));
    drop(lock);
    pipeline_run(&config).unwrap();
}

#[test]
fn skipping_the_llm_leaves_llm_metrics_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        skip_llm: true,
        ..common::golden_config(&dir.path().join("run"))
    };
    pipeline_run(&config).unwrap();
    assert!(!config.run_dir.join("attempts.jsonl").exists());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(config.run_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["LLM"]["pooled"]["correct"]["status"], "unavailable");
    assert!(report["run"]["provider"].is_null());
    assert_eq!(report["N_MISC"]["builtin"]["total"], 20);
}

#[test]
fn findings_records_carry_the_documented_fields() {
    let (_dir, config) = fresh_run();
    let text = fs::read_to_string(config.run_dir.join("findings.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for field in ["tool", "policy_id", "canonical_key", "api_version", "kind", "name", "namespace", "container", "chart", "severity"] {
        assert!(first.get(field).is_some(), "missing {field}");
    }
    assert_eq!(first["chart"], "stable/busybox@1.0.0");
    let findings = load_findings(&config.run_dir).unwrap();
    assert_eq!(findings.len(), 20);
    assert!(findings.iter().all(|(r, f)| r.chart == f.chart.to_string()));
    let catalog = fs::read_to_string(config.run_dir.join("catalog.json")).unwrap();
    assert!(catalog.contains("\"duplicate\"") && catalog.contains("\"yaml_syntax_error\""));
    assert!(config.run_dir.join("policy_map.yaml").is_file());
}

#[test]
fn labels_feed_the_validation_metrics() {
    let (_dir, config) = fresh_run();
    let sample: ValidationSample = serde_json::from_slice(&fs::read(config.run_dir.join("validation_sample.json")).unwrap()).unwrap();
    assert_eq!(sample.finding_ids.len(), 10);
    let label = |id: &str, reviewer: &str, verdict| ValidationLabel {
        finding_id: id.into(),
        reviewer: reviewer.into(),
        tool_verdict: verdict,
        refactor_verdict: None,
        note: String::new(),
        timestamp: String::new(),
    };
    let id = &sample.finding_ids[0];
    record_label(&config.run_dir, label(id, "ana", ToolVerdict::FalsePositive)).unwrap();
    record_label(&config.run_dir, label(id, "ana", ToolVerdict::TruePositive)).unwrap();
    record_label(&config.run_dir, label(&sample.finding_ids[1], "ana", ToolVerdict::FalsePositive)).unwrap();

    let unsampled = load_findings(&config.run_dir)
        .unwrap()
        .into_iter()
        .map(|(r, _)| r.id)
        .find(|id| !sample.finding_ids.contains(id))
        .unwrap();
    let err = record_label(&config.run_dir, label(&unsampled, "ana", ToolVerdict::TruePositive)).unwrap_err();
    assert!(err.to_string().contains("not in the validation sample"), "{err}");

    run_stage(&config, Stage::Report).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&fs::read(config.run_dir.join("report.json")).unwrap()).unwrap();
    let v = &report["validation"];
    assert_eq!((v["T_TP"]["x"].as_u64(), v["T_TP"]["n"].as_u64()), (Some(1), Some(2)));
    assert_eq!(v["labeled_findings"], 2);
    assert_eq!(fs::read_to_string(config.run_dir.join("labels.jsonl")).unwrap().lines().count(), 3);
}
