//! Proportion estimates, validation sampling and run reports.

mod interval;
mod outcomes;
mod report;
mod sample;

use thiserror::Error;

pub use interval::{agresti_coull, estimate, wilson, z_for_confidence, IntervalMethod, ProportionEstimate};
pub use outcomes::{proportions_from_outcomes, OutcomeCounts, OutcomeProportions};
pub use report::{
    build_report, Availability, LlmMetrics, Metric, MetricsReport, OutcomeMetrics, ReportInput, ReportRow, RunMetadata,
    ToolStatus, ValidationCounts, ValidationMetrics,
};
pub use sample::{sample_validation_subset, stratified_sample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("estimate undefined: no trials")]
    UndefinedEstimate,
    #[error("domain error: {0}")]
    Domain(String),
}
