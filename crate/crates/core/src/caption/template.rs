use std::collections::BTreeSet;

use super::CaptionError;
use crate::model::{ObjectId, ObjectNode, SceneGraph};

/// "tall and blue boy"
pub fn object_phrase(node: &ObjectNode) -> String {
    let attrs: Vec<&str> = node.attributes.iter().map(|a| a.lemma()).collect();
    if attrs.is_empty() {
        node.lemma().to_string()
    } else {
        format!("{} {}", attrs.join(" and "), node.lemma())
    }
}

/// "a" or "an" for the phrase that follows.
pub fn article(phrase: &str) -> &'static str {
    match phrase.chars().next() {
        Some(c) if "aeiouAEIOU".contains(c) => "an",
        _ => "a",
    }
}

/// Renders a subgraph as a caption.
///
/// Edges are taken in order; each starts a chain `subject rel object` that
/// continues while the next unused edge starts at the chain's tail. An
/// object's attributes are rendered at its first mention only. Chains and
/// objects not on any edge are joined with "and a".
pub fn template_caption(graph: &SceneGraph) -> Result<String, CaptionError> {
    if graph.objects().is_empty() {
        return Err(CaptionError::EmptyGraph);
    }
    let edges = graph.relationships();
    let mut used = vec![false; edges.len()];
    let mut mentioned: BTreeSet<ObjectId> = BTreeSet::new();
    let mut parts: Vec<String> = Vec::new();

    let mention = |id: ObjectId, mentioned: &mut BTreeSet<ObjectId>| {
        let node = graph.object(id).expect("edge endpoints exist");
        if mentioned.insert(id) {
            object_phrase(node)
        } else {
            node.lemma().to_string()
        }
    };

    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let e = &edges[start];
        let mut text = mention(e.subject_id, &mut mentioned);
        text.push(' ');
        text.push_str(e.relationship.lemma());
        text.push(' ');
        text.push_str(&mention(e.object_id, &mut mentioned));
        let mut tail = e.object_id;
        while let Some(next) = (0..edges.len()).find(|&k| !used[k] && edges[k].subject_id == tail) {
            used[next] = true;
            let e = &edges[next];
            text.push(' ');
            text.push_str(e.relationship.lemma());
            text.push(' ');
            text.push_str(&mention(e.object_id, &mut mentioned));
            tail = e.object_id;
        }
        parts.push(text);
    }
    for node in graph.objects() {
        if !mentioned.contains(&node.id) {
            mentioned.insert(node.id);
            parts.push(object_phrase(node));
        }
    }

    let mut out = parts[0].clone();
    for p in &parts[1..] {
        out.push_str(" and ");
        out.push_str(article(p));
        out.push(' ');
        out.push_str(p);
    }
    Ok(out)
}

/// Upper-cases the first character.
pub fn sentence_case(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
