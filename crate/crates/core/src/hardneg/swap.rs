use std::collections::BTreeSet;

use super::edit::{
    apply, article_fix, fit_case, lower_first, phrase_start, pre_nominal, rebuild,
    remove_attribute, TextEdit,
};
use super::foil::Slot;
use super::Candidate;
use crate::caption::sentence_case;
use crate::model::{Compound, SceneGraph};
use crate::parser::ParsedCaption;

/// Object count above which full permutations are not enumerated.
const MAX_PERMUTED: usize = 6;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Moves the text of `slots[perm[k]]` into `slots[k]`.
fn permute(text: &str, p: &ParsedCaption, slots: &[Slot], perm: &[usize]) -> Option<Candidate> {
    let mut edits = Vec::new();
    let mut objects = p.graph.objects().to_vec();
    let mut edges = p.graph.relationships().to_vec();
    let mut moved = Vec::new();
    for (k, &from) in perm.iter().enumerate() {
        if k == from {
            continue;
        }
        let (dest, src) = (slots[k], slots[from]);
        let dest_span = dest.span(p);
        let word = fit_case(&text[dest_span.clone()], &text[src.span(p)]);
        match dest {
            Slot::Object(i) => {
                let Slot::Object(j) = src else { return None };
                objects[i].atom = p.graph.objects()[j].atom.clone();
                if p.objects[i].phrase.start == dest_span.start {
                    edits.extend(article_fix(text, p, i, &word));
                }
            }
            Slot::Attribute(i, a) => {
                let Slot::Attribute(j, b) = src else {
                    return None;
                };
                objects[i].attributes[a] = p.graph.objects()[j].attributes[b].clone();
                if pre_nominal(p, i).first() == Some(&a) {
                    edits.extend(article_fix(text, p, i, &word));
                }
            }
            Slot::Relationship(e) => {
                let Slot::Relationship(f) = src else {
                    return None;
                };
                edges[e].relationship = p.graph.relationships()[f].relationship.clone();
            }
        }
        moved.push(format!("{}->{}", src.lemma(p), dest.lemma(p)));
        edits.push(TextEdit::new(dest_span, word));
    }
    if moved.is_empty() {
        return None;
    }
    Some(Candidate {
        text: apply(text, &edits)?,
        expected: rebuild(objects, edges)?,
        negation: None,
        provenance: format!("swap:{}", moved.join(",")),
    })
}

fn pair(n: usize, i: usize, j: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.swap(i, j);
    perm
}

fn attr_compound(p: &ParsedCaption, i: usize, k: usize, onto: usize) -> Option<Compound> {
    let g = &p.graph;
    Compound::attr_obj(
        g.objects()[i].attributes[k].clone(),
        g.objects()[onto].atom.clone(),
    )
    .ok()
}

/// Moves pre-nominal attribute `k` of object `i` in front of object `j`.
fn transfer(text: &str, p: &ParsedCaption, i: usize, k: usize, j: usize) -> Option<Candidate> {
    let attr = &text[p.objects[i].attribute_spans[k].clone()];
    let at = phrase_start(p, j);
    let opens = text[..at].trim().is_empty() && text[at..].starts_with(char::is_uppercase);
    let word = if opens {
        sentence_case(attr)
    } else {
        lower_first(attr)
    };
    let inserted = if pre_nominal(p, j).is_empty() {
        format!("{word} ")
    } else {
        format!("{word} and ")
    };
    let mut edits = remove_attribute(text, p, i, k);
    if edits.is_empty() {
        return None;
    }
    edits.push(TextEdit::insert(at, inserted));
    if opens {
        let first = text[at..].chars().next()?;
        edits.push(TextEdit::new(
            at..at + first.len_utf8(),
            first.to_lowercase().to_string(),
        ));
    }
    edits.extend(article_fix(text, p, j, &word));

    let mut objects = p.graph.objects().to_vec();
    let atom = objects[i].attributes.remove(k);
    if objects[j].has_attribute(atom.lemma()) {
        return None;
    }
    let lemma = atom.lemma().to_string();
    objects[j].attributes.push(atom);
    Some(Candidate {
        text: apply(text, &edits)?,
        expected: rebuild(objects, p.graph.relationships().to_vec())?,
        negation: None,
        provenance: format!(
            "move:{lemma}:{}->{}",
            p.graph.objects()[i].lemma(),
            p.graph.objects()[j].lemma()
        ),
    })
}

pub(crate) fn candidates(
    text: &str,
    p: &ParsedCaption,
    parent: &SceneGraph,
    permute_all: bool,
) -> Vec<Candidate> {
    let g = &p.graph;
    let parent_compounds: BTreeSet<Compound> = parent.compounds();
    let objects: Vec<Slot> = (0..g.objects().len()).map(Slot::Object).collect();
    let attributes: Vec<Slot> = g
        .objects()
        .iter()
        .enumerate()
        .flat_map(|(i, o)| (0..o.attributes.len()).map(move |k| Slot::Attribute(i, k)))
        .collect();
    let relations: Vec<Slot> = (0..g.relationships().len())
        .map(Slot::Relationship)
        .collect();

    let mut out = Vec::new();
    for i in 0..objects.len() {
        for j in i + 1..objects.len() {
            if g.objects()[i].lemma() != g.objects()[j].lemma() {
                out.extend(permute(text, p, &objects, &pair(objects.len(), i, j)));
            }
        }
    }
    for a in 0..attributes.len() {
        for b in a + 1..attributes.len() {
            let (Slot::Attribute(i, ka), Slot::Attribute(j, kb)) = (attributes[a], attributes[b])
            else {
                continue;
            };
            if i == j || attributes[a].lemma(p) == attributes[b].lemma(p) {
                continue;
            }
            let fresh = [attr_compound(p, i, ka, j), attr_compound(p, j, kb, i)]
                .iter()
                .all(|c| c.as_ref().is_some_and(|c| !parent_compounds.contains(c)));
            if fresh {
                out.extend(permute(text, p, &attributes, &pair(attributes.len(), a, b)));
            }
        }
    }
    for i in 0..g.objects().len() {
        for k in pre_nominal(p, i) {
            for j in 0..g.objects().len() {
                if i == j {
                    continue;
                }
                if attr_compound(p, i, k, j).is_some_and(|c| !parent_compounds.contains(&c)) {
                    out.extend(transfer(text, p, i, k, j));
                }
            }
        }
    }
    if permute_all {
        for slots in [&objects, &attributes, &relations] {
            if slots.len() < 2 || slots.len() > MAX_PERMUTED {
                continue;
            }
            for perm in permutations(slots.len()) {
                out.extend(permute(text, p, slots, &perm));
            }
        }
    }
    out
}
