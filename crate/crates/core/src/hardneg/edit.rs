use std::ops::Range;

use crate::caption::article;
use crate::model::{ObjectNode, RelEdge, SceneGraph};
use crate::parser::ParsedCaption;

/// Replace `range` of the source text with `with`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TextEdit {
    pub range: Range<usize>,
    pub with: String,
}

impl TextEdit {
    pub fn new(range: Range<usize>, with: impl Into<String>) -> Self {
        TextEdit {
            range,
            with: with.into(),
        }
    }

    pub fn insert(at: usize, with: impl Into<String>) -> Self {
        TextEdit::new(at..at, with)
    }
}

/// Applies non-overlapping edits; `None` if two edits overlap.
pub(crate) fn apply(text: &str, edits: &[TextEdit]) -> Option<String> {
    let mut sorted: Vec<&TextEdit> = edits.iter().collect();
    sorted.sort_by_key(|e| (e.range.start, e.range.end));
    for pair in sorted.windows(2) {
        if pair[0].range.end > pair[1].range.start
            || (pair[0].range.start == pair[1].range.start
                && pair[0].range.end > pair[0].range.start)
        {
            return None;
        }
    }
    let mut out = String::with_capacity(text.len() + 16);
    let mut at = 0;
    for e in sorted {
        out.push_str(&text[at..e.range.start]);
        out.push_str(&e.with);
        at = e.range.end;
    }
    out.push_str(&text[at..]);
    Some(out)
}

/// Indices of the attributes written before the head noun.
pub(crate) fn pre_nominal(parsed: &ParsedCaption, obj: usize) -> Vec<usize> {
    let p = &parsed.objects[obj];
    p.attribute_spans
        .iter()
        .enumerate()
        .filter(|(_, s)| s.end <= p.head.start)
        .map(|(k, _)| k)
        .collect()
}

/// Start of the first word of the object's phrase.
pub(crate) fn phrase_start(parsed: &ParsedCaption, obj: usize) -> usize {
    parsed.objects[obj].phrase.start
}

/// Corrects "a"/"an" before the object's phrase when its first word
/// becomes `new_first`.
pub(crate) fn article_fix(
    text: &str,
    parsed: &ParsedCaption,
    obj: usize,
    new_first: &str,
) -> Option<TextEdit> {
    let det = parsed.objects[obj].determiner.clone()?;
    let word = &text[det.clone()];
    let lower = word.to_lowercase();
    if lower != "a" && lower != "an" {
        return None;
    }
    let want = article(new_first);
    if want == lower {
        return None;
    }
    let with = if word.starts_with(char::is_uppercase) {
        crate::caption::sentence_case(want)
    } else {
        want.to_string()
    };
    Some(TextEdit::new(det, with))
}

/// Edits removing pre-nominal attribute `k` together with its connector.
pub(crate) fn remove_attribute(
    text: &str,
    parsed: &ParsedCaption,
    obj: usize,
    k: usize,
) -> Vec<TextEdit> {
    let p = &parsed.objects[obj];
    let pre = pre_nominal(parsed, obj);
    let Some(pos) = pre.iter().position(|&i| i == k) else {
        return Vec::new();
    };
    let span = |i: usize| p.attribute_spans[pre[i]].clone();
    let mut edits = Vec::new();
    if pre.len() == 1 {
        edits.push(TextEdit::new(span(0).start..p.head.start, ""));
        let head = &text[p.head.clone()];
        edits.extend(article_fix(text, parsed, obj, head));
    } else if pos == 0 {
        edits.push(TextEdit::new(span(0).start..span(1).start, ""));
        edits.extend(article_fix(text, parsed, obj, &text[span(1)]));
    } else {
        edits.push(TextEdit::new(span(pos - 1).end..span(pos).end, ""));
    }
    edits
}

/// Rebuilds a graph from edited parts.
pub(crate) fn rebuild(objects: Vec<ObjectNode>, edges: Vec<RelEdge>) -> Option<SceneGraph> {
    SceneGraph::new("negative", None, objects, edges).ok()
}

/// `new` with the capitalization of the first letter of `original`.
pub(crate) fn fit_case(original: &str, new: &str) -> String {
    if original.starts_with(char::is_uppercase) {
        crate::caption::sentence_case(new)
    } else {
        lower_first(new)
    }
}

pub(crate) fn strip_end_punct(s: &str) -> &str {
    s.trim_end().trim_end_matches(['.', '!', ';', ','])
}

pub(crate) fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}
