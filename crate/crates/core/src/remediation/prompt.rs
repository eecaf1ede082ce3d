use serde::{Deserialize, Serialize};

use crate::analysis::Finding;
use crate::manifest::{ResourceDoc, ResourceId};

/// The query sent for one finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub finding: Finding,
    pub snippet: ResourceId,
}

/// Turns a policy description into the tail of "... resource to <phrase>.".
///
/// The leading character is lowercased unless the first word is an acronym
/// (`CPU requests ...`), and a trailing period is dropped.
pub fn directive_phrase(description: &str) -> String {
    let text = description.trim().trim_end_matches('.').trim_end();
    let first_word = text.split_whitespace().next().unwrap_or_default();
    let acronym = first_word.chars().filter(|c| c.is_ascii_uppercase()).count() > 1;
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if !acronym => c.to_lowercase().chain(chars).collect(),
        _ => text.to_string(),
    }
}

pub fn build_prompt(finding: &Finding, snippet: &ResourceDoc) -> Prompt {
    let text = format!(
        "Refactor the following {} K8s resource to {}. Output only the refactored YAML file.\n\n{}",
        snippet.id.kind,
        directive_phrase(&finding.policy.description),
        snippet.raw_text
    );
    Prompt {
        text,
        finding: finding.clone(),
        snippet: snippet.id.clone(),
    }
}

/// The snippet embedded in a prompt built by [`build_prompt`].
pub fn prompt_snippet(prompt: &str) -> &str {
    prompt.split_once("\n\n").map_or("", |(_, s)| s)
}
