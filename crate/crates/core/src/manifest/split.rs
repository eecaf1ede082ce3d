use super::Span;

/// A `---` (start) or `...` (end) marker line, optionally followed by
/// whitespace or a comment.
fn is_boundary_line(line: &str) -> bool {
    let line = line.trim_end_matches(['\n', '\r']);
    let rest = match line.strip_prefix("---").or_else(|| line.strip_prefix("...")) {
        Some(rest) => rest,
        None => return false,
    };
    if rest.is_empty() {
        return true;
    }
    if !rest.starts_with([' ', '\t']) {
        return false;
    }
    let rest = rest.trim_start_matches([' ', '\t']);
    rest.is_empty() || rest.starts_with('#')
}

pub(super) fn starts_with_separator(text: &str) -> bool {
    text.split_inclusive('\n').next().is_some_and(is_boundary_line)
}

/// Byte spans of the document bodies in `text`, excluding boundary lines.
pub(super) fn document_spans(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut doc_start = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let line_end = offset + line.len();
        if is_boundary_line(line) {
            if offset > doc_start {
                spans.push(Span { start: doc_start, end: offset });
            }
            doc_start = line_end;
        }
        offset = line_end;
    }
    if text.len() > doc_start {
        spans.push(Span { start: doc_start, end: text.len() });
    }
    spans
}

pub(super) fn is_blank_document(body: &str) -> bool {
    body.lines().all(|l| {
        let t = l.trim();
        t.is_empty() || t.starts_with('#')
    })
}
