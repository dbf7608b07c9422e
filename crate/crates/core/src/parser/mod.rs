//! Rule-based caption parsing into scene graphs.
//!
//! Captions are tokenized, tagged against a [`Lexicon`] (longest multi-word
//! match first, then suffix rules), and chunked into noun phrases. Adjectives
//! to the left of a head noun, optionally joined by "and", become attributes.
//! A run of prepositions and verbs between two noun phrases becomes the
//! relationship of an edge from the earlier phrase to the later one. Articles
//! and copulas are dropped; unknown words are skipped.
//!
//! Negation markers are reported separately from the graph: "no X", "X that
//! is not A", "X is not R Y", and a leading "this image does not contain".

mod eval;
mod lexicon;

use std::ops::Range;

use thiserror::Error;

pub use eval::{evaluate_parser, CategoryScore, ParserReport};
pub use lexicon::{Lexicon, PosSet, LEXICON_FILES};

use crate::model::{Atom, ModelError, ObjectId, ObjectNode, RelEdge, SceneGraph};

pub type Span = Range<usize>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("caption text is empty")]
    EmptyText,
    #[error("no object found in {0:?}")]
    EmptyParse(String),
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("predictions ({predictions}) and gold graphs ({gold}) are not aligned")]
    AlignmentError { predictions: usize, gold: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A negative assertion found in the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Negation {
    /// "this image does not contain ..." wrapping the whole caption.
    Caption,
    /// "no X": the object is asserted absent.
    Object(ObjectId),
    /// "X that is not A".
    Attribute { object: ObjectId, attribute: Atom },
    /// "X is not R Y". The edge is not part of the graph.
    Relationship {
        subject: ObjectId,
        relationship: Atom,
        object: ObjectId,
    },
}

/// Text positions of one parsed object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedObject {
    /// Head noun.
    pub head: Span,
    /// Pre-nominal attributes through the head.
    pub phrase: Span,
    /// Article or "no" directly before the phrase.
    pub determiner: Option<Span>,
    /// One span per attribute, aligned with the graph node's attributes.
    pub attribute_spans: Vec<Span>,
}

/// Parse result with the text spans every atom came from.
#[derive(Debug, Clone)]
pub struct ParsedCaption {
    /// Object ids are `0..n` in order of appearance.
    pub graph: SceneGraph,
    pub objects: Vec<ParsedObject>,
    /// One span per graph edge.
    pub relation_spans: Vec<Span>,
    pub negations: Vec<Negation>,
}

impl ParsedCaption {
    pub fn is_negated(&self) -> bool {
        !self.negations.is_empty()
    }
}

/// Parses `text` into a scene graph.
pub fn parse_caption(text: &str, lexicon: &Lexicon) -> Result<SceneGraph, ParseError> {
    parse_detailed(text, lexicon).map(|p| p.graph)
}

#[derive(Debug, Clone)]
struct Token {
    span: Span,
    lower: String,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if is_word_char(c) {
            let start = i;
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                let joins = (d == '\'' || d == '-')
                    && text[j + d.len_utf8()..]
                        .chars()
                        .next()
                        .is_some_and(is_word_char);
                if is_word_char(d) || (joins && j > start) {
                    end = j + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            tokens.push(Token {
                span: start..end,
                lower: text[start..end].to_lowercase(),
            });
        } else {
            if matches!(c, ',' | '.' | ';' | ':' | '!' | '?' | '(' | ')') {
                tokens.push(Token {
                    span: i..i + c.len_utf8(),
                    lower: c.to_string(),
                });
            }
            chars.next();
        }
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum UnitKind {
    Word(PosSet),
    Article,
    Copula,
    And,
    Not,
    No,
    Punct,
    Unknown,
}

#[derive(Debug, Clone)]
struct Unit {
    kind: UnitKind,
    span: Span,
    text: String,
}

const ARTICLES: &[&str] = &[
    "a", "an", "the", "some", "another", "its", "their", "his", "her",
];
const COPULAS: &[&str] = &["is", "are", "was", "were", "be", "been", "being", "am"];
const WHOLE_NEGATION: &[&str] = &["this", "image", "does", "not", "contain"];

fn function_word(word: &str) -> Option<UnitKind> {
    if ARTICLES.contains(&word) {
        Some(UnitKind::Article)
    } else if COPULAS.contains(&word) {
        Some(UnitKind::Copula)
    } else if word == "and" {
        Some(UnitKind::And)
    } else if word == "not" || word.ends_with("n't") {
        Some(UnitKind::Not)
    } else if word == "no" {
        Some(UnitKind::No)
    } else {
        None
    }
}

fn units(tokens: &[Token], lexicon: &Lexicon) -> Vec<Unit> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        if tok.lower.len() == 1 && !tok.lower.chars().all(is_word_char) {
            out.push(Unit {
                kind: UnitKind::Punct,
                span: tok.span.clone(),
                text: tok.lower.clone(),
            });
            i += 1;
            continue;
        }
        let longest = lexicon.max_words().min(tokens.len() - i);
        let mut matched = None;
        for len in (2..=longest).rev() {
            let window = &tokens[i..i + len];
            if window
                .iter()
                .any(|t| t.lower.len() == 1 && !t.lower.chars().all(is_word_char))
            {
                continue;
            }
            let phrase = window
                .iter()
                .map(|t| t.lower.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            let pos = lexicon.lookup(&phrase);
            if !pos.is_empty() {
                matched = Some((len, pos, phrase));
                break;
            }
        }
        if let Some((len, pos, phrase)) = matched {
            out.push(Unit {
                kind: UnitKind::Word(pos),
                span: tok.span.start..tokens[i + len - 1].span.end,
                text: phrase,
            });
            i += len;
            continue;
        }
        let kind = function_word(&tok.lower).unwrap_or_else(|| {
            let pos = lexicon.tag_word(&tok.lower);
            if pos.is_empty() {
                UnitKind::Unknown
            } else {
                UnitKind::Word(pos)
            }
        });
        out.push(Unit {
            kind,
            span: tok.span.clone(),
            text: tok.lower.clone(),
        });
        i += 1;
    }
    out
}

fn nominal(unit: &Unit) -> Option<PosSet> {
    match unit.kind {
        UnitKind::Word(pos) if pos.nominal() => Some(pos),
        _ => None,
    }
}

/// End (exclusive) of the noun-phrase chunk starting at `start`.
fn chunk_end(units: &[Unit], start: usize) -> usize {
    let mut j = start;
    while j < units.len() {
        let joins_adjectives = units[j].kind == UnitKind::And
            && j > start
            && nominal(&units[j - 1]).is_some_and(|p| p.adjective)
            && units.get(j + 1).and_then(nominal).is_some();
        if nominal(&units[j]).is_some() || joins_adjectives {
            j += 1;
        } else {
            break;
        }
    }
    j
}

#[derive(Default)]
struct ParseState {
    objects: Vec<ObjectNode>,
    parsed: Vec<ParsedObject>,
    edges: Vec<RelEdge>,
    relation_spans: Vec<Span>,
    negations: Vec<Negation>,
    last: Option<usize>,
    relation: Vec<usize>,
    relation_negated: bool,
    copula: bool,
    not: bool,
    no: bool,
    determiner: Option<Span>,
}

impl ParseState {
    fn separate(&mut self) {
        self.last = None;
        self.relation.clear();
        self.relation_negated = false;
        self.copula = false;
        self.not = false;
        self.no = false;
        self.determiner = None;
    }

    fn add_attribute(&mut self, object: usize, unit: &Unit) -> Result<(), ParseError> {
        let atom = Atom::attribute(&unit.text)?;
        if self.objects[object].has_attribute(atom.lemma()) {
            return Ok(());
        }
        self.objects[object].attributes.push(atom);
        self.parsed[object].attribute_spans.push(unit.span.clone());
        Ok(())
    }

    fn noun_phrase(&mut self, units: &[Unit], chunk: Range<usize>) -> Result<(), ParseError> {
        let words: Vec<usize> = chunk
            .clone()
            .filter(|&k| nominal(&units[k]).is_some())
            .collect();
        let head = words
            .iter()
            .rposition(|&k| nominal(&units[k]).is_some_and(|p| p.noun));
        let Some(head) = head else {
            // adjectives without a head: predicative after a copula
            if let (Some(obj), true) = (self.last, self.copula) {
                for &k in &words {
                    if self.not {
                        self.negations.push(Negation::Attribute {
                            object: obj as ObjectId,
                            attribute: Atom::attribute(&units[k].text)?,
                        });
                    } else {
                        self.add_attribute(obj, &units[k])?;
                    }
                }
            }
            self.copula = false;
            self.not = false;
            return Ok(());
        };
        let mut head_start = head;
        while head_start > 0 {
            let prev = words[head_start - 1];
            let pos = nominal(&units[prev]).expect("filtered");
            if pos.noun && !pos.adjective && prev + 1 == words[head_start] {
                head_start -= 1;
            } else {
                break;
            }
        }
        let head_units = &words[head_start..=head];
        let head_text = head_units
            .iter()
            .map(|&k| units[k].text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let head_span = units[head_units[0]].span.start..units[words[head]].span.end;
        let phrase_span = units[words[0]].span.start..head_span.end;

        let id = self.objects.len();
        self.objects.push(ObjectNode {
            id: id as ObjectId,
            atom: Atom::object(&head_text)?,
            attributes: Vec::new(),
            bbox: None,
        });
        self.parsed.push(ParsedObject {
            head: head_span,
            phrase: phrase_span,
            determiner: self.determiner.take(),
            attribute_spans: Vec::new(),
        });
        for &k in &words[..head_start] {
            if nominal(&units[k]).is_some_and(|p| p.adjective) {
                self.add_attribute(id, &units[k])?;
            }
        }

        if let (Some(subject), false) = (self.last, self.relation.is_empty()) {
            let text = self
                .relation
                .iter()
                .map(|&k| units[k].text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            let relationship = Atom::relationship(&text)?;
            let span = units[self.relation[0]].span.start
                ..units[*self.relation.last().expect("non-empty")].span.end;
            if self.relation_negated {
                self.negations.push(Negation::Relationship {
                    subject: subject as ObjectId,
                    relationship,
                    object: id as ObjectId,
                });
            } else {
                self.edges.push(RelEdge {
                    subject_id: subject as ObjectId,
                    relationship,
                    object_id: id as ObjectId,
                });
                self.relation_spans.push(span);
            }
        }
        if self.no {
            self.negations.push(Negation::Object(id as ObjectId));
        }
        self.last = Some(id);
        self.relation.clear();
        self.relation_negated = false;
        self.copula = false;
        self.not = false;
        self.no = false;
        Ok(())
    }
}

/// Parses `text` and reports the span of every atom.
pub fn parse_detailed(text: &str, lexicon: &Lexicon) -> Result<ParsedCaption, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::EmptyText);
    }
    let tokens = tokenize(text);
    let whole = tokens.len() > WHOLE_NEGATION.len()
        && tokens
            .iter()
            .zip(WHOLE_NEGATION)
            .all(|(t, w)| t.lower == *w);
    let skip = if whole { WHOLE_NEGATION.len() } else { 0 };
    let units = units(&tokens[skip..], lexicon);

    let mut st = ParseState::default();
    if whole {
        st.negations.push(Negation::Caption);
    }
    let mut i = 0;
    while i < units.len() {
        let unit = &units[i];
        match unit.kind {
            UnitKind::Word(pos) if pos.nominal() => {
                let end = chunk_end(&units, i);
                st.noun_phrase(&units, i..end)?;
                i = end;
                continue;
            }
            UnitKind::Word(pos) if pos.relational() => {
                if st.last.is_some() {
                    st.relation.push(i);
                    st.relation_negated |= st.not;
                    st.not = false;
                    st.copula = false;
                }
                st.determiner = None;
            }
            UnitKind::Word(_) | UnitKind::Unknown => {}
            UnitKind::Article => st.determiner = Some(unit.span.clone()),
            UnitKind::Copula => {
                if st.last.is_some() {
                    st.copula = true;
                }
            }
            UnitKind::Not => st.not = true,
            UnitKind::No => {
                st.no = true;
                st.determiner = Some(unit.span.clone());
            }
            UnitKind::And | UnitKind::Punct => st.separate(),
        }
        i += 1;
    }

    if st.objects.is_empty() {
        return Err(ParseError::EmptyParse(text.to_string()));
    }
    let graph = SceneGraph::new("caption", None, st.objects, st.edges)?;
    Ok(ParsedCaption {
        graph,
        objects: st.parsed,
        relation_spans: st.relation_spans,
        negations: st.negations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CanonicalForm;

    fn lex() -> Lexicon {
        Lexicon::bundled()
    }

    fn canon(text: &str) -> CanonicalForm {
        parse_caption(text, &lex()).unwrap().canonical()
    }

    fn graph(build: crate::model::SceneGraphBuilder) -> CanonicalForm {
        build.build().unwrap().canonical()
    }

    #[test]
    fn template_example() {
        let want = graph(
            SceneGraph::builder("g")
                .object(0, "boy", &["tall", "blue"])
                .object(1, "grass", &["green"])
                .relation(0, "on", 1),
        );
        assert_eq!(canon("tall and blue boy on green grass"), want);
    }

    #[test]
    fn multiword_relationship() {
        let want = graph(
            SceneGraph::builder("g")
                .object(0, "grill", &[])
                .object(1, "porch", &[])
                .relation(0, "on top of", 1),
        );
        assert_eq!(canon("a grill on top of the porch"), want);
    }

    #[test]
    fn bare_noun() {
        let g = parse_caption("sunset", &lex()).unwrap();
        assert_eq!(g.objects().len(), 1);
        assert_eq!(g.objects()[0].lemma(), "sunset");
        assert!(g.relationships().is_empty());
    }

    #[test]
    fn no_object_is_an_error() {
        assert!(matches!(
            parse_caption("on the", &lex()),
            Err(ParseError::EmptyParse(_))
        ));
        assert!(matches!(
            parse_caption("  ", &lex()),
            Err(ParseError::EmptyText)
        ));
    }

    #[test]
    fn conjoined_noun_phrases_are_separate_objects() {
        let p = parse_detailed("There is a dog on the bed and also a nightstand", &lex()).unwrap();
        let names: Vec<_> = p
            .graph
            .objects()
            .iter()
            .map(|o| o.lemma().to_string())
            .collect();
        assert_eq!(names, ["dog", "bed", "nightstand"]);
        assert_eq!(p.graph.relationships().len(), 1);
        assert!(p.negations.is_empty());
    }

    #[test]
    fn verb_and_particle_form_one_relationship() {
        let g = parse_caption("a man standing next to a red car", &lex()).unwrap();
        assert_eq!(
            g.relationships()[0].relationship.lemma(),
            "standing next to"
        );
    }

    #[test]
    fn ambiguous_word_resolved_by_position() {
        let g = parse_caption("orange cat near an orange", &lex()).unwrap();
        assert_eq!(g.objects()[0].lemma(), "cat");
        assert_eq!(g.objects()[0].attributes[0].lemma(), "orange");
        assert_eq!(g.objects()[1].lemma(), "orange");
    }

    #[test]
    fn multiword_nouns_and_plurals() {
        let g = parse_caption("two tennis balls on a table", &lex()).unwrap();
        assert_eq!(g.objects()[0].lemma(), "tennis ball");
    }

    #[test]
    fn relation_chain() {
        let want = graph(
            SceneGraph::builder("g")
                .object(0, "cat", &[])
                .object(1, "bed", &[])
                .object(2, "floor", &[])
                .relation(0, "on", 1)
                .relation(1, "on", 2),
        );
        assert_eq!(canon("cat on bed on floor"), want);
    }

    #[test]
    fn predicative_attribute() {
        let g = parse_caption("the dog is black", &lex()).unwrap();
        assert_eq!(g.objects()[0].attributes[0].lemma(), "black");
    }

    #[test]
    fn negations() {
        let p = parse_detailed("dog that is not black on a building", &lex()).unwrap();
        assert!(p.graph.objects()[0].attributes.is_empty());
        assert_eq!(p.graph.relationships().len(), 1);
        assert!(
            matches!(&p.negations[..], [Negation::Attribute { object: 0, attribute }] if attribute.lemma() == "black")
        );

        let p = parse_detailed("tall boy is not on green grass", &lex()).unwrap();
        assert!(p.graph.relationships().is_empty());
        assert!(matches!(
            &p.negations[..],
            [Negation::Relationship {
                subject: 0,
                object: 1,
                ..
            }]
        ));

        let p = parse_detailed("no black dog on a bed", &lex()).unwrap();
        assert_eq!(p.negations, vec![Negation::Object(0)]);
        assert_eq!(p.graph.relationships().len(), 1);

        let p = parse_detailed("this image does not contain a black dog", &lex()).unwrap();
        assert_eq!(p.negations, vec![Negation::Caption]);
        assert_eq!(p.graph.compounds().len(), 1);
    }

    #[test]
    fn spans_point_at_source_text() {
        let text = "Tall and Blue boy on green Grass";
        let p = parse_detailed(text, &lex()).unwrap();
        assert_eq!(&text[p.objects[0].head.clone()], "boy");
        assert_eq!(&text[p.objects[0].phrase.clone()], "Tall and Blue boy");
        assert_eq!(&text[p.objects[0].attribute_spans[1].clone()], "Blue");
        assert_eq!(&text[p.relation_spans[0].clone()], "on");
        assert_eq!(&text[p.objects[1].head.clone()], "Grass");
    }

    #[test]
    fn determiner_recorded() {
        let text = "a black dog near the tree";
        let p = parse_detailed(text, &lex()).unwrap();
        assert_eq!(&text[p.objects[0].determiner.clone().unwrap()], "a");
        assert_eq!(&text[p.objects[1].determiner.clone().unwrap()], "the");
    }

    #[test]
    fn unknown_words_skipped() {
        let g = parse_caption("a zorblax dog quietly near a tree", &lex()).unwrap();
        assert_eq!(g.objects().len(), 2);
        assert_eq!(g.relationships()[0].relationship.lemma(), "near");
    }

    #[test]
    fn deterministic() {
        let a = parse_caption("black and white dog on a brown couch", &lex()).unwrap();
        let b = parse_caption("black and white dog on a brown couch", &lex()).unwrap();
        assert_eq!(a, b);
    }
}
