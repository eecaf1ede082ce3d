use serde::{Deserialize, Serialize};
use similar::TextDiff;

use super::ResourceDoc;

/// Line-based comparison of an original and a refactored snippet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetDiff {
    pub is_empty: bool,
    pub unified_text: String,
}

/// Strips trailing whitespace from every line and drops trailing blank
/// lines. Every kept line ends with `\n`.
pub fn normalize_trailing_whitespace(text: &str) -> String {
    let mut lines: Vec<&str> = text.lines().map(str::trim_end).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let mut out = String::with_capacity(text.len());
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn diff_resource(original: &ResourceDoc, refactored: &ResourceDoc) -> SnippetDiff {
    diff_text(&original.raw_text, &refactored.raw_text)
}

pub(crate) fn diff_text(original: &str, refactored: &str) -> SnippetDiff {
    let before = normalize_trailing_whitespace(original);
    let after = normalize_trailing_whitespace(refactored);
    if before == after {
        return SnippetDiff {
            is_empty: true,
            unified_text: String::new(),
        };
    }
    let unified_text = TextDiff::from_lines(&before, &after)
        .unified_diff()
        .context_radius(3)
        .header("original", "refactored")
        .to_string();
    SnippetDiff {
        is_empty: false,
        unified_text,
    }
}
