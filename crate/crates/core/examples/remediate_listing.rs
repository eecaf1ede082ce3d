//! Asks a provider to fix the memory-request finding of the listing pod,
//! then re-scans and classifies the answer.
//!
//! cargo run --example remediate_listing -- [mock:fix|mock:break|mock:echo|mock:prose|openai|gemini]

use chart_sentry::analysis::builtin::MEM_REQ;
use chart_sentry::analysis::{run_builtin_analyzer, BuiltinAnalyzer};
use chart_sentry::catalog::ChartRef;
use chart_sentry::manifest::parse_manifests;
use chart_sentry::remediation::provider::{provider_from_id, ProviderSettings};
use chart_sentry::remediation::{AttemptInput, Remediator};

const LISTING_POD: &str = include_str!("../fixtures/listing1_pod.yaml");

fn main() -> anyhow::Result<()> {
    let id = std::env::args().nth(1).unwrap_or_else(|| "mock".into());
    let provider = provider_from_id(&id, &ProviderSettings::default())?;
    let set = parse_manifests(LISTING_POD);
    let findings = run_builtin_analyzer(&set, &ChartRef::default());
    let finding = findings.iter().find(|f| f.policy.policy_id == MEM_REQ).expect("listing has a memory finding");
    let work = std::env::temp_dir().join("chart-sentry-remediate-listing");

    let (attempt, _) = Remediator::new(provider.as_ref()).attempt(&AttemptInput {
        finding_id: "listing",
        finding,
        current: &set,
        baseline: &findings,
        analyzer: &BuiltinAnalyzer::default(),
        work_dir: &work,
        policy_key: finding.policy.equivalence_class.clone(),
    })?;
    println!("prompt:\n{}\n", attempt.prompt.text);
    println!("diff:\n{}", attempt.diff.unified_text);
    println!("outcome: {:?} ({:?})", attempt.outcome, attempt.failure_detail);
    Ok(())
}
