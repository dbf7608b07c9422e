use super::edit::{
    apply, fit_case, lower_first, rebuild, remove_attribute, strip_end_punct, TextEdit,
};
use super::{Candidate, ExpectedNegation};
use crate::caption::article;
use crate::model::{singularize, ObjectId, SceneGraph};
use crate::parser::ParsedCaption;

const COPULAS: &[&str] = &["is", "are", "was", "were"];
const NEGATION_PREFIX: &str = "This image does not contain ";

/// Parent objects that fit object `obj` of `caption`: same lemma, every
/// caption attribute except `ignore`, and every caption edge at the object
/// matched by relationship and neighbour lemma in the same direction.
pub fn matching_objects(
    parent: &SceneGraph,
    caption: &SceneGraph,
    obj: ObjectId,
    ignore: Option<&str>,
) -> Vec<ObjectId> {
    let Some(node) = caption.object(obj) else {
        return Vec::new();
    };
    let lemma_of = |g: &SceneGraph, id: ObjectId| g.object(id).map(|o| o.lemma().to_string());
    parent
        .objects()
        .iter()
        .filter(|p| p.lemma() == node.lemma())
        .filter(|p| {
            node.attributes
                .iter()
                .filter(|a| Some(a.lemma()) != ignore)
                .all(|a| p.has_attribute(a.lemma()))
        })
        .filter(|p| {
            caption.relationships().iter().all(|e| {
                let rel = e.relationship.lemma();
                if e.subject_id == obj {
                    let other = lemma_of(caption, e.object_id);
                    parent.relationships().iter().any(|f| {
                        f.subject_id == p.id
                            && f.relationship.lemma() == rel
                            && lemma_of(parent, f.object_id) == other
                    })
                } else if e.object_id == obj {
                    let other = lemma_of(caption, e.subject_id);
                    parent.relationships().iter().any(|f| {
                        f.object_id == p.id
                            && f.relationship.lemma() == rel
                            && lemma_of(parent, f.subject_id) == other
                    })
                } else {
                    true
                }
            })
        })
        .map(|p| p.id)
        .collect()
}

/// "X that is not A" is false: some parent object fits X and all of them
/// have A.
pub fn attribute_negation_holds(
    parent: &SceneGraph,
    caption: &SceneGraph,
    obj: ObjectId,
    attribute: &str,
) -> bool {
    let matches = matching_objects(parent, caption, obj, Some(attribute));
    !matches.is_empty()
        && matches.iter().all(|&id| {
            parent
                .object(id)
                .is_some_and(|o| o.has_attribute(attribute))
        })
}

/// "X is not R Y" is false: the parent relates an X to a Y by R and by
/// nothing else.
pub fn relationship_negation_holds(
    parent: &SceneGraph,
    subject: &str,
    relationship: &str,
    object: &str,
) -> bool {
    let lemma = |id| parent.object(id).map(|o| o.lemma());
    let between: Vec<&str> = parent
        .relationships()
        .iter()
        .filter(|e| lemma(e.subject_id) == Some(subject) && lemma(e.object_id) == Some(object))
        .map(|e| e.relationship.lemma())
        .collect();
    !between.is_empty() && between.iter().all(|&r| r == relationship)
}

/// "no X" is false: some parent object fits X.
pub fn object_negation_holds(parent: &SceneGraph, caption: &SceneGraph, obj: ObjectId) -> bool {
    !matching_objects(parent, caption, obj, None).is_empty()
}

fn whole_caption(text: &str, p: &ParsedCaption, parent: &SceneGraph) -> Option<Candidate> {
    let g = &p.graph;
    if !g.compounds().is_subset(&parent.compounds()) || !g.atoms().is_subset(&parent.atoms()) {
        return None;
    }
    let body = strip_end_punct(text).trim_start();
    let tail = &text.trim_end()[strip_end_punct(text).len()..];
    let lower = body.to_lowercase();
    let body = ["there is ", "there are "]
        .iter()
        .find(|pre| lower.starts_with(*pre))
        .map_or(body, |pre| &body[pre.len()..]);
    let first = &p.objects[0];
    let bare = first.determiner.is_none() && text[..first.phrase.start].trim().is_empty();
    let body = lower_first(body);
    let body = if bare {
        format!("{} {body}", article(&body))
    } else {
        body
    };
    Some(Candidate {
        text: format!("{NEGATION_PREFIX}{body}{tail}"),
        expected: g.clone(),
        negation: Some(ExpectedNegation::Caption),
        provenance: "negate:caption".into(),
    })
}

fn attribute(
    text: &str,
    p: &ParsedCaption,
    parent: &SceneGraph,
    i: usize,
    k: usize,
) -> Option<Candidate> {
    let g = &p.graph;
    let node = &g.objects()[i];
    let attr = node.attributes[k].lemma();
    if !attribute_negation_holds(parent, g, i as ObjectId, attr) {
        return None;
    }
    let span = p.objects[i].attribute_spans[k].clone();
    let edits = if span.start >= p.objects[i].head.end {
        vec![TextEdit::insert(span.start, "not ")]
    } else {
        let mut e = remove_attribute(text, p, i, k);
        e.push(TextEdit::insert(
            p.objects[i].head.end,
            format!(" that is not {}", lower_first(&text[span])),
        ));
        e
    };
    let mut objects = g.objects().to_vec();
    objects[i].attributes.remove(k);
    Some(Candidate {
        text: apply(text, &edits)?,
        expected: rebuild(objects, g.relationships().to_vec())?,
        negation: Some(ExpectedNegation::Attribute(
            node.lemma().to_string(),
            attr.to_string(),
        )),
        provenance: format!("negate:attribute:{attr}:{}", node.lemma()),
    })
}

fn relationship(text: &str, p: &ParsedCaption, parent: &SceneGraph, e: usize) -> Option<Candidate> {
    let g = &p.graph;
    let edge = &g.relationships()[e];
    let subject = g.object(edge.subject_id)?;
    let object = g.object(edge.object_id)?;
    let rel = edge.relationship.lemma();
    if !relationship_negation_holds(parent, subject.lemma(), rel, object.lemma()) {
        return None;
    }
    let span = p.relation_spans[e].clone();
    let before = text[..span.start].trim_end().to_lowercase();
    let insert = if COPULAS
        .iter()
        .any(|c| before.ends_with(&format!(" {c}")) || before == *c)
    {
        "not ".to_string()
    } else {
        let head = text[p.objects[edge.subject_id as usize].head.clone()].to_lowercase();
        let verb = if singularize(&head) != head {
            "are"
        } else {
            "is"
        };
        format!("{verb} not ")
    };
    let mut edges = g.relationships().to_vec();
    edges.remove(e);
    Some(Candidate {
        text: apply(text, &[TextEdit::insert(span.start, insert)])?,
        expected: rebuild(g.objects().to_vec(), edges)?,
        negation: Some(ExpectedNegation::Relationship(
            subject.lemma().to_string(),
            rel.to_string(),
            object.lemma().to_string(),
        )),
        provenance: format!(
            "negate:relationship:{}:{rel}:{}",
            subject.lemma(),
            object.lemma()
        ),
    })
}

fn object(text: &str, p: &ParsedCaption, parent: &SceneGraph, i: usize) -> Option<Candidate> {
    let g = &p.graph;
    if !object_negation_holds(parent, g, i as ObjectId) {
        return None;
    }
    let edit = match &p.objects[i].determiner {
        Some(d) => TextEdit::new(d.clone(), fit_case(&text[d.clone()], "no")),
        None => {
            let at = p.objects[i].phrase.start;
            if text[..at].trim().is_empty() && text[at..].starts_with(char::is_uppercase) {
                let first = text[at..].chars().next()?;
                TextEdit::new(
                    at..at + first.len_utf8(),
                    format!("No {}", first.to_lowercase()),
                )
            } else {
                TextEdit::insert(at, "no ")
            }
        }
    };
    Some(Candidate {
        text: apply(text, &[edit])?,
        expected: g.clone(),
        negation: Some(ExpectedNegation::Object(g.objects()[i].lemma().to_string())),
        provenance: format!("negate:object:{}", g.objects()[i].lemma()),
    })
}

/// Negations in order: whole caption, then per object its attributes and
/// the object itself, then relationships.
pub(crate) fn candidates(text: &str, p: &ParsedCaption, parent: &SceneGraph) -> Vec<Candidate> {
    let mut out = Vec::new();
    out.extend(whole_caption(text, p, parent));
    for i in 0..p.objects.len() {
        for k in 0..p.graph.objects()[i].attributes.len() {
            out.extend(attribute(text, p, parent, i, k));
        }
        out.extend(object(text, p, parent, i));
    }
    for e in 0..p.graph.relationships().len() {
        out.extend(relationship(text, p, parent, e));
    }
    out
}
