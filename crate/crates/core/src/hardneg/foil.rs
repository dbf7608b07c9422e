use std::collections::BTreeSet;

use super::edit::{
    apply, article_fix, fit_case, lower_first, pre_nominal, rebuild, strip_end_punct, TextEdit,
};
use super::Candidate;
use crate::caption::article;
use crate::lexical::LexicalResource;
use crate::model::{Atom, AtomKind, Compound, SceneGraph};
use crate::parser::{ParsedCaption, Span};

/// One replaceable atom of a parsed caption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    Object(usize),
    Attribute(usize, usize),
    Relationship(usize),
}

impl Slot {
    pub fn kind(self) -> AtomKind {
        match self {
            Slot::Object(_) => AtomKind::Object,
            Slot::Attribute(..) => AtomKind::Attribute,
            Slot::Relationship(_) => AtomKind::Relationship,
        }
    }

    pub fn span(self, p: &ParsedCaption) -> Span {
        match self {
            Slot::Object(i) => p.objects[i].head.clone(),
            Slot::Attribute(i, k) => p.objects[i].attribute_spans[k].clone(),
            Slot::Relationship(e) => p.relation_spans[e].clone(),
        }
    }

    pub fn lemma(self, p: &ParsedCaption) -> &str {
        let g = &p.graph;
        match self {
            Slot::Object(i) => g.objects()[i].lemma(),
            Slot::Attribute(i, k) => g.objects()[i].attributes[k].lemma(),
            Slot::Relationship(e) => g.relationships()[e].relationship.lemma(),
        }
    }

    fn describe(self, p: &ParsedCaption, foil: &str) -> String {
        format!("{}:{}->{}", self.kind().as_str(), self.lemma(p), foil)
    }
}

/// Every atom slot, in text order.
pub(crate) fn slots(p: &ParsedCaption) -> Vec<Slot> {
    let mut out = Vec::new();
    for (i, o) in p.graph.objects().iter().enumerate() {
        out.push(Slot::Object(i));
        out.extend((0..o.attributes.len()).map(|k| Slot::Attribute(i, k)));
    }
    out.extend((0..p.graph.relationships().len()).map(Slot::Relationship));
    out.sort_by_key(|s| s.span(p).start);
    out
}

/// Antonyms, or cousins when there are none.
pub(crate) fn foils(
    lexical: &dyn LexicalResource,
    lemma: &str,
    kind: AtomKind,
) -> BTreeSet<String> {
    let mut out = lexical.antonyms(lemma, kind);
    if out.is_empty() {
        out = lexical.cousins(lemma, kind);
    }
    out.remove(lemma);
    out
}

/// Text edits and predicted graph for replacing `slot` with `foil`.
pub(crate) fn substitute(
    text: &str,
    p: &ParsedCaption,
    slot: Slot,
    foil: &str,
) -> Option<(Vec<TextEdit>, SceneGraph)> {
    let span = slot.span(p);
    let mut edits = vec![TextEdit::new(
        span.clone(),
        fit_case(&text[span.clone()], foil),
    )];
    let mut objects = p.graph.objects().to_vec();
    let mut edges = p.graph.relationships().to_vec();
    match slot {
        Slot::Object(i) => {
            if p.objects[i].phrase.start == span.start {
                edits.extend(article_fix(text, p, i, foil));
            }
            objects[i].atom = Atom::object(foil).ok()?;
        }
        Slot::Attribute(i, k) => {
            if pre_nominal(p, i).first() == Some(&k) {
                edits.extend(article_fix(text, p, i, foil));
            }
            objects[i].attributes[k] = Atom::attribute(foil).ok()?;
        }
        Slot::Relationship(e) => edges[e].relationship = Atom::relationship(foil).ok()?,
    }
    Some((edits, rebuild(objects, edges)?))
}

pub(crate) fn atom_candidates(
    text: &str,
    p: &ParsedCaption,
    lexical: &dyn LexicalResource,
) -> (Vec<Candidate>, Vec<(AtomKind, String)>) {
    let mut out = Vec::new();
    let mut words = Vec::new();
    for slot in slots(p) {
        for foil in foils(lexical, slot.lemma(p), slot.kind()) {
            if let Some((edits, expected)) = substitute(text, p, slot, &foil) {
                if let Some(new_text) = apply(text, &edits) {
                    out.push(Candidate {
                        text: new_text,
                        expected,
                        negation: None,
                        provenance: slot.describe(p, &foil),
                    });
                }
            }
            words.push((slot.kind(), foil));
        }
    }
    (out, words)
}

/// The compound of a single-compound graph.
fn only_compound(g: &SceneGraph) -> Option<Compound> {
    let c = g.compounds();
    (c.len() == 1).then(|| c.into_iter().next().expect("one"))
}

/// Appends `b` to `a`, shifting `b`'s object ids past `a`'s.
fn union(a: &SceneGraph, b: &SceneGraph) -> Option<SceneGraph> {
    let shift = a.objects().iter().map(|o| o.id + 1).max().unwrap_or(0);
    let mut objects = a.objects().to_vec();
    let mut edges = a.relationships().to_vec();
    objects.extend(b.objects().iter().cloned().map(|mut o| {
        o.id += shift;
        o
    }));
    edges.extend(b.relationships().iter().cloned().map(|mut e| {
        e.subject_id += shift;
        e.object_id += shift;
        e
    }));
    rebuild(objects, edges)
}

pub(crate) fn comp_candidates(
    text: &str,
    p: &ParsedCaption,
    lexical: &dyn LexicalResource,
    parent: &SceneGraph,
) -> (Vec<Candidate>, Vec<(AtomKind, String)>) {
    let compound_slots: Vec<Slot> = slots(p)
        .into_iter()
        .filter(|s| match *s {
            Slot::Object(i) => {
                !p.graph.objects()[i].attributes.is_empty()
                    || !p.graph.neighbors(i as u64).is_empty()
            }
            _ => true,
        })
        .collect();
    let parent_compounds = parent.compounds();
    let body = strip_end_punct(text);
    let tail = &text.trim_end()[body.len()..];
    let bare_start = p
        .objects
        .first()
        .is_some_and(|o| o.phrase.start == text.len() - text.trim_start().len());

    let options: Vec<Vec<(String, Vec<TextEdit>, SceneGraph)>> = compound_slots
        .iter()
        .map(|&slot| {
            foils(lexical, slot.lemma(p), slot.kind())
                .into_iter()
                .filter_map(|f| {
                    let (edits, g) = substitute(body, p, slot, &f)?;
                    let c = only_compound(&g)?;
                    (!parent_compounds.contains(&c)).then_some((f, edits, g))
                })
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    let mut words = Vec::new();
    for (i, opts) in options.iter().enumerate() {
        words.extend(
            opts.iter()
                .map(|(f, ..)| (compound_slots[i].kind(), f.clone())),
        );
    }
    for i in 0..compound_slots.len() {
        for j in i + 1..compound_slots.len() {
            for (fi, ei, gi) in &options[i] {
                for (fj, ej, gj) in &options[j] {
                    let (Some(t1), Some(t2)) = (apply(body, ei), apply(body, ej)) else {
                        continue;
                    };
                    let t2 = lower_first(t2.trim_start());
                    let t2 = if bare_start {
                        format!("{} {t2}", article(&t2))
                    } else {
                        t2
                    };
                    let Some(expected) = union(gi, gj) else {
                        continue;
                    };
                    out.push(Candidate {
                        text: format!("{} and {t2}{tail}", t1.trim_end()),
                        expected,
                        negation: None,
                        provenance: format!(
                            "{} + {}",
                            compound_slots[i].describe(p, fi),
                            compound_slots[j].describe(p, fj)
                        ),
                    });
                }
            }
        }
    }
    (out, words)
}
