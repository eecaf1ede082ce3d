use super::FailureDetail;
use crate::manifest::ResourceDoc;

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Body of the first fenced code block; an unclosed fence runs to the end.
fn fenced_block(raw: &str) -> Option<String> {
    let mut lines = raw.lines().skip_while(|l| !is_fence(l));
    lines.next()?;
    let body: Vec<&str> = lines.take_while(|l| !is_fence(l)).collect();
    Some(body.join("\n") + "\n")
}

fn is_top_level_key(line: &str) -> bool {
    let Some((key, rest)) = line.split_once(':') else {
        return false;
    };
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "_.-/\"'".contains(c))
        && (rest.is_empty() || rest.starts_with([' ', '\t']))
}

fn is_yaml_line(line: &str) -> bool {
    line.trim().is_empty()
        || line.starts_with([' ', '\t', '-', '#'])
        || is_top_level_key(line)
}

/// Drops prose lines before the first top-level key (keeping comments right
/// above it) and after the last YAML-looking line.
fn strip_prose(raw: &str) -> String {
    let lines: Vec<&str> = raw.lines().collect();
    let Some(mut start) = lines.iter().position(|l| is_top_level_key(l) || l.trim_end() == "---") else {
        return String::new();
    };
    while start > 0 && lines[start - 1].starts_with('#') {
        start -= 1;
    }
    let end = lines.iter().rposition(|l| is_yaml_line(l)).map_or(start, |e| e + 1);
    if end <= start {
        return String::new();
    }
    lines[start..end].join("\n") + "\n"
}

/// Pulls the refactored resource out of a model response. The result must
/// be a single resource with the original kind, name and namespace.
pub fn extract_refactored(raw_response: &str, original: &ResourceDoc) -> Result<ResourceDoc, FailureDetail> {
    let body = fenced_block(raw_response).unwrap_or_else(|| strip_prose(raw_response));
    let body: String = {
        let mut lines: Vec<&str> = body.lines().collect();
        while lines.first().is_some_and(|l| l.trim().is_empty() || l.trim_end() == "---") {
            lines.remove(0);
        }
        while lines.last().is_some_and(|l| l.trim().is_empty() || l.trim_end() == "...") {
            lines.pop();
        }
        lines.iter().map(|l| format!("{l}\n")).collect()
    };
    if body.trim().is_empty() {
        return Err(FailureDetail::UnparseableOutput);
    }
    let doc = ResourceDoc::from_text(&body).map_err(|_| FailureDetail::UnparseableOutput)?;
    if doc.id != original.id {
        return Err(FailureDetail::IdentityChanged);
    }
    Ok(doc)
}
