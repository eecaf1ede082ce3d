//! HTTP service for labeling the validation sample.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::labels::{active_labels, LabelError, LabelStore, ValidationLabel};
use super::pipeline::{label_store, load_findings, FindingRecord};
use super::rundir::{self, read_jsonl, RunDir};
use super::OrchestratorError;
use crate::manifest::{locate_resource, parse_manifests, SnippetDiff};
use crate::remediation::{Outcome, RemediationAttempt};

const PAGE: &str = include_str!("../../assets/review.html");

#[derive(Debug, Clone, Copy, Default)]
pub struct ReviewOptions {
    /// Hide which tool reported each finding.
    pub blind: bool,
}

#[derive(Debug, Clone, Serialize)]
struct QueueItem {
    finding_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    tool: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy_id: Option<String>,
    canonical_key: String,
    description: String,
    chart: String,
    resource: String,
    container: Option<String>,
    snippet: String,
    diff: Option<SnippetDiff>,
    outcome: Option<Outcome>,
    label: Option<ValidationLabel>,
}

struct ReviewState {
    items: Vec<QueueItem>,
    store: Mutex<LabelStore>,
}

type Shared = Arc<ReviewState>;

fn queue_items(run_dir: &Path, blind: bool, sampled: &std::collections::BTreeSet<String>) -> Result<Vec<QueueItem>, OrchestratorError> {
    let run = RunDir::new(run_dir);
    let attempts: BTreeMap<String, RemediationAttempt> = read_jsonl::<RemediationAttempt>(&run.path(rundir::ATTEMPTS))?
        .into_iter()
        .map(|a| (a.finding_id.clone(), a))
        .collect();
    let mut manifests = BTreeMap::new();
    let mut items = Vec::new();
    for (record, finding) in load_findings(run_dir)? {
        if !sampled.contains(&record.id) {
            continue;
        }
        let slug = finding.chart.slug();
        if !manifests.contains_key(&slug) {
            let path = run.chart_dir(&slug).join("manifest.yaml");
            let text = std::fs::read_to_string(&path).map_err(|e| rundir::io_err(&path, e))?;
            manifests.insert(slug.clone(), parse_manifests(&text));
        }
        let snippet = locate_resource(&manifests[&slug], &finding.resource)
            .map(|d| d.raw_text.clone())
            .unwrap_or_default();
        let attempt = attempts.get(&record.id);
        let FindingRecord { id, tool, policy_id, canonical_key, description, chart, kind, name, namespace, container, .. } = record;
        items.push(QueueItem {
            finding_id: id,
            tool: (!blind).then(|| tool.to_string()),
            policy_id: (!blind).then_some(policy_id),
            canonical_key,
            description,
            chart,
            resource: format!("{kind}/{namespace}/{name}"),
            container,
            snippet,
            diff: attempt.map(|a| a.diff.clone()),
            outcome: attempt.and_then(|a| a.outcome),
            label: None,
        });
    }
    Ok(items)
}

/// Routes of the review service over a scanned run directory.
pub fn review_router(run_dir: &Path, opts: ReviewOptions) -> Result<Router, OrchestratorError> {
    let store = label_store(run_dir)?;
    let items = queue_items(run_dir, opts.blind, store.sampled())?;
    let state = Arc::new(ReviewState {
        items,
        store: Mutex::new(store),
    });
    Ok(Router::new()
        .route("/", get(|| async { Html(PAGE) }))
        .route("/api/queue", get(queue))
        .route("/api/labels", axum::routing::post(post_label))
        .route("/api/progress", get(progress))
        .with_state(state))
}

fn error(status: StatusCode, message: impl ToString) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

fn internal(e: OrchestratorError) -> Response {
    error(StatusCode::INTERNAL_SERVER_ERROR, e)
}

#[derive(Deserialize)]
struct QueueQuery {
    reviewer: Option<String>,
}

async fn queue(State(state): State<Shared>, Query(q): Query<QueueQuery>) -> Response {
    let Some(reviewer) = q.reviewer.filter(|r| !r.trim().is_empty()) else {
        return error(StatusCode::BAD_REQUEST, LabelError::EmptyReviewer);
    };
    let active = match state.store.lock().expect("label store").active() {
        Ok(a) => a,
        Err(e) => return internal(e),
    };
    let mine: BTreeMap<&str, &ValidationLabel> = active
        .iter()
        .filter(|l| l.reviewer == reviewer)
        .map(|l| (l.finding_id.as_str(), l))
        .collect();
    let items: Vec<QueueItem> = state
        .items
        .iter()
        .map(|i| QueueItem {
            label: mine.get(i.finding_id.as_str()).map(|l| (*l).clone()),
            ..i.clone()
        })
        .collect();
    Json(json!({ "reviewer": reviewer, "items": items })).into_response()
}

async fn post_label(State(state): State<Shared>, body: Bytes) -> Response {
    let label: ValidationLabel = match serde_json::from_slice(&body) {
        Ok(l) => l,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    match state.store.lock().expect("label store").record(label) {
        Ok(saved) => (StatusCode::CREATED, Json(saved)).into_response(),
        Err(OrchestratorError::Label(e)) => {
            let status = match e {
                LabelError::UnknownFinding(_) => StatusCode::NOT_FOUND,
                LabelError::NotSampled(_) => StatusCode::UNPROCESSABLE_ENTITY,
                LabelError::EmptyReviewer => StatusCode::BAD_REQUEST,
            };
            error(status, e)
        }
        Err(e) => internal(e),
    }
}

async fn progress(State(state): State<Shared>) -> Response {
    let store = state.store.lock().expect("label store");
    let history = match store.history() {
        Ok(h) => h,
        Err(e) => return internal(e),
    };
    let active = active_labels(&history);
    let mut per_reviewer: BTreeMap<&str, usize> = BTreeMap::new();
    for l in &active {
        *per_reviewer.entry(&l.reviewer).or_default() += 1;
    }
    let counts = super::labels::validation_counts(&active, store.sampled().len());
    Json(json!({
        "sampled": counts.sampled,
        "labeled_findings": counts.labeled_findings,
        "per_reviewer": per_reviewer,
        "counts": counts,
    }))
    .into_response()
}

/// Serves the review UI until the process is stopped. Holds the run lock.
pub fn serve_review(run_dir: PathBuf, addr: SocketAddr, opts: ReviewOptions) -> Result<(), OrchestratorError> {
    let run = RunDir::new(&run_dir);
    let _lock = run.lock()?;
    let app = review_router(&run_dir, opts)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| rundir::io_err(&run_dir, e))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| OrchestratorError::Config(format!("cannot bind {addr}: {e}")))?;
        tracing::info!("review service on http://{addr}/");
        axum::serve(listener, app).await.map_err(|e| rundir::io_err(&run_dir, e))
    })
}
