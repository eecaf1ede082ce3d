//! Scan Helm charts for security misconfigurations, ask a language model to
//! refactor each offending resource, verify the refactoring by re-scanning,
//! and summarize the outcomes with binomial confidence intervals.

pub mod analysis;
pub mod catalog;
pub mod manifest;
pub mod orchestrator;
pub mod process;
pub mod remediation;
pub mod stats;
