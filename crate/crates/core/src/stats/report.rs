//! The metrics report: JSON plus CSV and Markdown tables.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::outcomes::OutcomeCounts;
use super::{agresti_coull, wilson, StatsError};
use crate::analysis::{count_misconfigurations, unique_policies, EquivalenceMap, Finding, QuarantinedFinding, Tool, ToolCounts};
use crate::remediation::{Outcome, RemediationAttempt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Availability {
    Available,
    Unavailable,
}

/// A proportion with both intervals. Unavailable when `n` is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub status: Availability,
    pub x: u64,
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<f64>,
    /// Agresti-Coull.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilson_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilson_hi: Option<f64>,
}

impl Metric {
    pub fn unavailable(x: u64, n: u64) -> Self {
        Self {
            status: Availability::Unavailable,
            x,
            n,
            z: None,
            point: None,
            center: None,
            lo: None,
            hi: None,
            wilson_lo: None,
            wilson_hi: None,
        }
    }

    pub fn new(x: u64, n: u64, z: f64) -> Result<Self, StatsError> {
        if n == 0 {
            return Ok(Self::unavailable(x, n));
        }
        let ac = agresti_coull(x, n, z)?;
        let w = wilson(x, n, z)?;
        Ok(Self {
            status: Availability::Available,
            x,
            n,
            z: Some(z),
            point: Some(ac.point),
            center: Some(ac.center),
            lo: Some(ac.lo),
            hi: Some(ac.hi),
            wilson_lo: Some(w.lo),
            wilson_hi: Some(w.hi),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolStatus {
    /// `ran`, `skipped` or `failed`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Descriptive run data carried into the report verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub confidence: f64,
    pub z: f64,
    pub sample_size: usize,
    pub provider: Option<String>,
    pub model: Option<String>,
    pub tools: BTreeMap<Tool, ToolStatus>,
    pub charts_eligible: usize,
    pub charts_excluded: BTreeMap<String, usize>,
}

/// Active manual labels, already reduced to one per (finding, reviewer).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationCounts {
    pub sampled: u64,
    pub labeled_findings: u64,
    pub true_positive: u64,
    pub false_positive: u64,
    pub refactor_correct: u64,
    pub refactor_wrong: u64,
    pub refactor_refused: u64,
}

impl ValidationCounts {
    pub fn refactor_verdicts(&self) -> u64 {
        self.refactor_correct + self.refactor_wrong + self.refactor_refused
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeMetrics {
    pub attempts: u64,
    pub provider_errors: u64,
    pub correct: Metric,
    pub wrong: Metric,
    pub refused: Metric,
}

impl OutcomeMetrics {
    fn from_counts(c: OutcomeCounts, z: f64) -> Result<Self, StatsError> {
        let n = c.classified();
        Ok(Self {
            attempts: c.attempts(),
            provider_errors: c.provider_errors,
            correct: Metric::new(c.correct, n, z)?,
            wrong: Metric::new(c.wrong, n, z)?,
            refused: Metric::new(c.refused, n, z)?,
        })
    }

    fn get(&self, o: Outcome) -> &Metric {
        match o {
            Outcome::Correct => &self.correct,
            Outcome::Wrong => &self.wrong,
            Outcome::Refused => &self.refused,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmMetrics {
    pub pooled: OutcomeMetrics,
    pub per_tool: BTreeMap<Tool, OutcomeMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationMetrics {
    pub sampled: u64,
    pub labeled_findings: u64,
    #[serde(rename = "T_TP")]
    pub t_tp: Metric,
    #[serde(rename = "T_FP")]
    pub t_fp: Metric,
    #[serde(rename = "LLM_I_C")]
    pub llm_i_c: Metric,
    #[serde(rename = "LLM_I_W")]
    pub llm_i_w: Metric,
    #[serde(rename = "LLM_I_R")]
    pub llm_i_r: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub run: RunMetadata,
    #[serde(rename = "N_MISC")]
    pub n_misc: BTreeMap<Tool, ToolCounts>,
    #[serde(rename = "U_POL")]
    pub u_pol: BTreeMap<Tool, BTreeSet<String>>,
    pub quarantined: BTreeMap<Tool, usize>,
    #[serde(rename = "LLM")]
    pub llm: LlmMetrics,
    pub validation: ValidationMetrics,
}

pub struct ReportInput<'a> {
    pub metadata: RunMetadata,
    pub findings: &'a [Finding],
    pub quarantined: &'a [QuarantinedFinding],
    pub attempts: &'a [RemediationAttempt],
    pub validation: ValidationCounts,
    pub map: &'a EquivalenceMap,
}

pub fn build_report(input: ReportInput<'_>) -> Result<MetricsReport, StatsError> {
    let z = input.metadata.z;
    let selected: Vec<Tool> = input.metadata.tools.keys().copied().collect();

    let mut n_misc = count_misconfigurations(input.findings);
    let mut u_pol = unique_policies(input.findings, input.map);
    let mut quarantined = BTreeMap::new();
    for t in &selected {
        n_misc.entry(*t).or_default();
        u_pol.entry(*t).or_default();
        quarantined.insert(*t, 0);
    }
    for q in input.quarantined {
        *quarantined.entry(q.policy.tool).or_default() += 1;
    }

    let pooled = OutcomeCounts::tally(input.attempts.iter().map(|a| a.outcome));
    let mut per_tool_counts: BTreeMap<Tool, Vec<Option<Outcome>>> = BTreeMap::new();
    for a in input.attempts {
        per_tool_counts.entry(a.prompt.finding.tool()).or_default().push(a.outcome);
    }
    let mut per_tool = BTreeMap::new();
    for (tool, outcomes) in per_tool_counts {
        per_tool.insert(tool, OutcomeMetrics::from_counts(OutcomeCounts::tally(outcomes), z)?);
    }

    let v = input.validation;
    let verdicts = v.refactor_verdicts();
    let labels = v.true_positive + v.false_positive;
    let validation = ValidationMetrics {
        sampled: v.sampled,
        labeled_findings: v.labeled_findings,
        t_tp: Metric::new(v.true_positive, labels, z)?,
        t_fp: Metric::new(v.false_positive, labels, z)?,
        llm_i_c: Metric::new(v.refactor_correct, verdicts, z)?,
        llm_i_w: Metric::new(v.refactor_wrong, verdicts, z)?,
        llm_i_r: Metric::new(v.refactor_refused, verdicts, z)?,
    };

    Ok(MetricsReport {
        run: input.metadata,
        n_misc,
        u_pol,
        quarantined,
        llm: LlmMetrics {
            pooled: OutcomeMetrics::from_counts(pooled, z)?,
            per_tool,
        },
        validation,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    /// One row per metric and scope.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for (tool, counts) in &self.n_misc {
            rows.push(ReportRow::count("N_MISC", tool.as_str(), counts.total as u64));
        }
        for (tool, keys) in &self.u_pol {
            rows.push(ReportRow::count("U_POL", tool.as_str(), keys.len() as u64));
        }
        for (name, outcome) in [("LLM_C", Outcome::Correct), ("LLM_W", Outcome::Wrong), ("LLM_R", Outcome::Refused)] {
            rows.push(ReportRow::metric(name, "pooled", self.llm.pooled.get(outcome)));
            for (tool, m) in &self.llm.per_tool {
                rows.push(ReportRow::metric(name, tool.as_str(), m.get(outcome)));
            }
        }
        let v = &self.validation;
        for (name, m) in [
            ("T_TP", &v.t_tp),
            ("T_FP", &v.t_fp),
            ("LLM_I_C", &v.llm_i_c),
            ("LLM_I_W", &v.llm_i_w),
            ("LLM_I_R", &v.llm_i_r),
        ] {
            rows.push(ReportRow::metric(name, "sample", m));
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.rows() {
            w.serialize(row).expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn to_markdown(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let level = format!("{:.1}", self.run.confidence * 100.0);
        let level = level.trim_end_matches(".0");
        let mut out = format!("| metric | scope | x | n | point | {level}% AC | {level}% Wilson |\n|---|---|---|---|---|---|---|\n");
        for r in self.rows() {
            let n = r.n.map_or_else(|| "-".to_string(), |n| n.to_string());
            let (ac, w) = if r.status == Availability::Available && r.lo.is_some() {
                (
                    format!("[{}, {}]", fmt(r.lo), fmt(r.hi)),
                    format!("[{}, {}]", fmt(r.wilson_lo), fmt(r.wilson_hi)),
                )
            } else if r.n.is_some() && r.status == Availability::Unavailable {
                ("unavailable".into(), "unavailable".into())
            } else {
                ("-".into(), "-".into())
            };
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} |\n",
                r.metric,
                r.scope,
                r.x,
                n,
                fmt(r.point),
                ac,
                w
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub metric: &'static str,
    pub scope: String,
    pub status: Availability,
    pub x: u64,
    pub n: Option<u64>,
    pub point: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub wilson_lo: Option<f64>,
    pub wilson_hi: Option<f64>,
}

impl ReportRow {
    fn count(metric: &'static str, scope: &str, x: u64) -> Self {
        Self {
            metric,
            scope: scope.to_string(),
            status: Availability::Available,
            x,
            n: None,
            point: None,
            lo: None,
            hi: None,
            wilson_lo: None,
            wilson_hi: None,
        }
    }

    fn metric(metric: &'static str, scope: &str, m: &Metric) -> Self {
        Self {
            metric,
            scope: scope.to_string(),
            status: m.status,
            x: m.x,
            n: Some(m.n),
            point: m.point,
            lo: m.lo,
            hi: m.hi,
            wilson_lo: m.wilson_lo,
            wilson_hi: m.wilson_hi,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metadata(tools: &[Tool]) -> RunMetadata {
        RunMetadata {
            seed: 7,
            confidence: 0.95,
            z: 1.96,
            sample_size: 0,
            provider: None,
            model: None,
            tools: tools
                .iter()
                .map(|t| (*t, ToolStatus { status: "ran".into(), version: None, detail: None }))
                .collect(),
            charts_eligible: 0,
            charts_excluded: BTreeMap::new(),
        }
    }

    #[test]
    fn empty_run_is_zero_and_unavailable() {
        let map = EquivalenceMap::bundled();
        let r = build_report(ReportInput {
            metadata: metadata(&[Tool::Builtin, Tool::Kics]),
            findings: &[],
            quarantined: &[],
            attempts: &[],
            validation: ValidationCounts::default(),
            map: &map,
        })
        .unwrap();
        assert_eq!(r.n_misc[&Tool::Kics].total, 0);
        assert!(r.u_pol[&Tool::Builtin].is_empty());
        assert_eq!(r.llm.pooled.correct.status, Availability::Unavailable);
        assert_eq!(r.validation.t_tp.status, Availability::Unavailable);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["N_MISC", "U_POL", "LLM"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        for key in ["T_TP", "T_FP", "LLM_I_C", "LLM_I_W", "LLM_I_R"] {
            assert_eq!(json["validation"][key]["status"], "unavailable", "{key}");
        }
        let csv = r.to_csv();
        assert!(csv.starts_with("metric,scope,status,x,n,point,lo,hi,wilson_lo,wilson_hi\n"));
        assert!(csv.contains("T_TP,sample,unavailable,0,0,,,,,\n"));
        assert!(r.to_markdown().contains("| LLM_C | pooled | 0 | 0 | - | unavailable | unavailable |"));
    }

    #[test]
    fn validation_metrics_use_labels() {
        let map = EquivalenceMap::bundled();
        let r = build_report(ReportInput {
            metadata: metadata(&[Tool::Builtin]),
            findings: &[],
            quarantined: &[],
            attempts: &[],
            validation: ValidationCounts {
                sampled: 12,
                labeled_findings: 10,
                true_positive: 7,
                false_positive: 3,
                ..Default::default()
            },
            map: &map,
        })
        .unwrap();
        let ac = agresti_coull(7, 10, 1.96).unwrap();
        assert_eq!(r.validation.t_tp.lo, Some(ac.lo));
        assert_eq!(r.validation.t_tp.hi, Some(ac.hi));
        assert_eq!(r.validation.llm_i_c.status, Availability::Unavailable);
    }
}
