//! Hard-negative captions verified against the parent scene graph.
//!
//! Every generator works on the parsed ground-truth caption: it edits the
//! text at the spans of the atoms it changes, predicts the graph the edited
//! text should parse to, and keeps the candidate only if
//!
//! - re-parsing the edited text gives exactly the predicted graph,
//! - the predicted graph differs from the ground truth, and
//! - the edit introduces a compound absent from the parent graph (or, for
//!   an object without compounds, an object absent from it).
//!
//! Negations are checked with their own predicates instead of the last
//! rule. Candidates are enumerated in text order, then a seeded sample of
//! the configured size is drawn.

mod edit;
mod foil;
mod neg;
mod swap;

use std::borrow::Cow;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexical::LexicalResource;
use crate::model::{AtomKind, SceneGraph};
use crate::parser::{parse_detailed, Lexicon, ParseError, ParsedCaption};
use crate::seed::rng_for;

pub use neg::{
    attribute_negation_holds, matching_objects, object_negation_holds, relationship_negation_holds,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HnType {
    Atom,
    Comp,
    Swap,
    Neg,
}

impl HnType {
    pub const ALL: [HnType; 4] = [HnType::Atom, HnType::Comp, HnType::Swap, HnType::Neg];

    pub fn as_str(self) -> &'static str {
        match self {
            HnType::Atom => "atom",
            HnType::Comp => "comp",
            HnType::Swap => "swap",
            HnType::Neg => "neg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        HnType::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for HnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardNegative {
    pub text: String,
    pub hn_type: HnType,
    /// The atoms the edit touched.
    pub provenance: String,
    pub verified: bool,
}

/// Negatives requested per query and type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HnCounts {
    pub atom: usize,
    pub comp: usize,
    pub swap: usize,
    pub neg: usize,
}

impl HnCounts {
    pub fn systematicity() -> Self {
        HnCounts {
            atom: 4,
            comp: 6,
            swap: 0,
            neg: 0,
        }
    }

    pub fn productivity() -> Self {
        HnCounts {
            atom: 5,
            comp: 0,
            swap: 5,
            neg: 5,
        }
    }

    pub fn get(&self, t: HnType) -> usize {
        match t {
            HnType::Atom => self.atom,
            HnType::Comp => self.comp,
            HnType::Swap => self.swap,
            HnType::Neg => self.neg,
        }
    }

    /// Types with a positive count.
    pub fn types(&self) -> Vec<HnType> {
        HnType::ALL
            .into_iter()
            .filter(|&t| self.get(t) > 0)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HnConfig {
    pub counts: HnCounts,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HnError {
    #[error("ground truth does not parse: {0}")]
    Parse(#[from] ParseError),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("no valid foil available")]
    NoFoilAvailable,
}

/// A ground-truth caption and the image graph it is checked against.
#[derive(Debug, Clone, Copy)]
pub struct HnQuery<'a> {
    pub query_id: &'a str,
    pub caption: &'a str,
    pub parent: &'a SceneGraph,
    /// Atom count of the sampled subgraph, when the caption came from one.
    pub complexity: Option<usize>,
}

/// Output row for one query and type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HnRow {
    pub query_id: String,
    pub gt: String,
    pub hn_type: HnType,
    pub negatives: Vec<HardNegative>,
    pub requested: usize,
    /// Requested minus emitted.
    pub shortfall: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// What a negated caption must parse back to, by lemma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum ExpectedNegation {
    Caption,
    Object(String),
    Attribute(String, String),
    Relationship(String, String, String),
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub text: String,
    pub expected: SceneGraph,
    pub negation: Option<ExpectedNegation>,
    pub provenance: String,
}

/// True when `negative` carries a compound neither in the ground truth nor
/// in the parent, or an object without compounds whose lemma is new to
/// both.
pub fn introduces_falsehood(gt: &SceneGraph, negative: &SceneGraph, parent: &SceneGraph) -> bool {
    let gt_compounds = gt.compounds();
    let parent_compounds = parent.compounds();
    if negative
        .compounds()
        .iter()
        .any(|c| !gt_compounds.contains(c) && !parent_compounds.contains(c))
    {
        return true;
    }
    let known: BTreeSet<&str> = gt
        .objects()
        .iter()
        .chain(parent.objects())
        .map(|o| o.lemma())
        .collect();
    negative.objects().iter().any(|o| {
        o.attributes.is_empty() && negative.neighbors(o.id).is_empty() && !known.contains(o.lemma())
    })
}

fn parsed_negations(p: &ParsedCaption) -> Vec<ExpectedNegation> {
    use crate::parser::Negation;
    let name = |id: u64| {
        p.graph
            .object(id)
            .map(|o| o.lemma().to_string())
            .unwrap_or_default()
    };
    p.negations
        .iter()
        .map(|n| match n {
            Negation::Caption => ExpectedNegation::Caption,
            Negation::Object(id) => ExpectedNegation::Object(name(*id)),
            Negation::Attribute { object, attribute } => {
                ExpectedNegation::Attribute(name(*object), attribute.lemma().to_string())
            }
            Negation::Relationship {
                subject,
                relationship,
                object,
            } => ExpectedNegation::Relationship(
                name(*subject),
                relationship.lemma().to_string(),
                name(*object),
            ),
        })
        .collect()
}

/// Produces hard negatives using a parser lexicon and a lexical resource.
pub struct HardNegGenerator<'a> {
    lexicon: &'a Lexicon,
    lexical: &'a dyn LexicalResource,
}

impl<'a> HardNegGenerator<'a> {
    pub fn new(lexicon: &'a Lexicon, lexical: &'a dyn LexicalResource) -> Self {
        HardNegGenerator { lexicon, lexical }
    }

    fn parse_gt(&self, q: &HnQuery) -> Result<ParsedCaption, HnError> {
        let p = parse_detailed(q.caption, self.lexicon)?;
        if p.is_negated() {
            return Err(HnError::Precondition(
                "ground truth is already negated".into(),
            ));
        }
        Ok(p)
    }

    /// Parser lexicon extended with foil words it does not know.
    fn lexicon_with(&self, foils: &[(AtomKind, String)]) -> Lexicon {
        let mut lex = self.lexicon.clone();
        for (kind, word) in foils {
            let pos = lex.lookup(word);
            match kind {
                AtomKind::Object if !pos.noun && !pos.preposition => lex.add_noun(word),
                AtomKind::Attribute if !pos.adjective && !pos.preposition => {
                    lex.add_adjective(word)
                }
                AtomKind::Relationship if pos.is_empty() => lex.add_preposition(word),
                _ => {}
            }
        }
        lex
    }

    fn verify(&self, lex: &Lexicon, gt: &ParsedCaption, q: &HnQuery, c: &Candidate) -> bool {
        if c.text.trim() == q.caption.trim() {
            return false;
        }
        let Ok(re) = parse_detailed(&c.text, lex) else {
            return false;
        };
        if re.graph.canonical() != c.expected.canonical() {
            return false;
        }
        match &c.negation {
            None => {
                re.negations.is_empty()
                    && c.expected.canonical() != gt.graph.canonical()
                    && introduces_falsehood(&gt.graph, &c.expected, q.parent)
            }
            Some(n) => parsed_negations(&re) == [n.clone()],
        }
    }

    /// The first candidate of a same-text group that passes verification.
    fn first_verified(
        &self,
        p: &Pending,
        q: &HnQuery,
        t: HnType,
        group: &[Candidate],
    ) -> Option<HardNegative> {
        group
            .iter()
            .find(|c| self.verify(&p.lexicon, &p.gt, q, c))
            .map(|c| HardNegative {
                text: c.text.clone(),
                hn_type: t,
                provenance: c.provenance.clone(),
                verified: true,
            })
    }

    /// Unverified candidates of type `t`, grouped by text in order of first
    /// appearance.
    fn pending(&self, q: &HnQuery, t: HnType) -> Result<Pending<'a>, HnError> {
        let gt = self.parse_gt(q)?;
        let (cands, lexicon) = match t {
            HnType::Atom => {
                let (cands, foils) = foil::atom_candidates(q.caption, &gt, self.lexical);
                (cands, Cow::Owned(self.lexicon_with(&foils)))
            }
            HnType::Comp => {
                let g = &gt.graph;
                let instances: usize = g
                    .objects()
                    .iter()
                    .map(|o| o.attributes.len())
                    .sum::<usize>()
                    + g.relationships().len();
                if instances != 1 {
                    return Err(HnError::Precondition(format!(
                        "caption has {instances} compounds, compound foils need exactly one"
                    )));
                }
                let (cands, foils) = foil::comp_candidates(q.caption, &gt, self.lexical, q.parent);
                (cands, Cow::Owned(self.lexicon_with(&foils)))
            }
            HnType::Swap => {
                let complexity = q.complexity.unwrap_or_else(|| gt.graph.atom_count());
                (
                    swap::candidates(q.caption, &gt, q.parent, complexity == 4),
                    Cow::Borrowed(self.lexicon),
                )
            }
            HnType::Neg => (
                neg::candidates(q.caption, &gt, q.parent),
                Cow::Borrowed(self.lexicon),
            ),
        };
        let mut groups: Vec<Vec<Candidate>> = Vec::new();
        let mut by_text: HashMap<String, usize> = HashMap::new();
        for c in cands {
            match by_text.get(&c.text) {
                Some(&i) => groups[i].push(c),
                None => {
                    by_text.insert(c.text.clone(), groups.len());
                    groups.push(vec![c]);
                }
            }
        }
        Ok(Pending {
            gt,
            lexicon,
            groups,
        })
    }

    /// Atomic foils: one atom replaced by an antonym, or by a cousin when
    /// the atom has no antonym.
    pub fn hn_atom(&self, q: &HnQuery) -> Result<Vec<HardNegative>, HnError> {
        self.candidates(q, HnType::Atom)
    }

    /// Two compound foils joined by "and", each replacing a different atom
    /// of the caption's single compound.
    pub fn hn_comp(&self, q: &HnQuery) -> Result<Vec<HardNegative>, HnError> {
        self.candidates(q, HnType::Comp)
    }

    /// Same-kind swaps, attribute transfers and, at complexity 4, any
    /// same-kind permutation.
    pub fn hn_swap(&self, q: &HnQuery) -> Result<Vec<HardNegative>, HnError> {
        self.candidates(q, HnType::Swap)
    }

    /// Whole-caption, attribute, relationship and object negations that
    /// the parent graph shows to be false.
    pub fn hn_neg(&self, q: &HnQuery) -> Result<Vec<HardNegative>, HnError> {
        self.candidates(q, HnType::Neg)
    }

    /// Every verified candidate of type `t`, in canonical order.
    pub fn candidates(&self, q: &HnQuery, t: HnType) -> Result<Vec<HardNegative>, HnError> {
        let p = self.pending(q, t)?;
        non_empty(
            p.groups
                .iter()
                .filter_map(|g| self.first_verified(&p, q, t, g))
                .collect(),
        )
    }

    /// A seeded uniform sample of `count` verified candidates, kept in
    /// canonical order. Candidates are verified in a seeded random order
    /// until `count` pass, so the result is a sample of
    /// [`candidates`](Self::candidates) without verifying all of them.
    pub fn generate(&self, q: &HnQuery, t: HnType, count: usize, seed: u64) -> HnRow {
        let mut row = HnRow {
            query_id: q.query_id.to_string(),
            gt: q.caption.to_string(),
            hn_type: t,
            negatives: Vec::new(),
            requested: count,
            shortfall: count,
            note: None,
        };
        let p = match self.pending(q, t) {
            Ok(p) => p,
            Err(e) => {
                row.note = Some(e.to_string());
                return row;
            }
        };
        let mut order: Vec<usize> = (0..p.groups.len()).collect();
        order.shuffle(&mut rng_for(seed, &format!("hardneg/{t}/{}", q.query_id)));
        let mut picked: Vec<(usize, HardNegative)> = Vec::with_capacity(count);
        for i in order {
            if picked.len() == count {
                break;
            }
            if let Some(h) = self.first_verified(&p, q, t, &p.groups[i]) {
                picked.push((i, h));
            }
        }
        if picked.is_empty() && count > 0 {
            row.note = Some(HnError::NoFoilAvailable.to_string());
        }
        picked.sort_unstable_by_key(|(i, _)| *i);
        row.negatives = picked.into_iter().map(|(_, h)| h).collect();
        row.shortfall = count - row.negatives.len();
        row
    }
}

/// Candidates awaiting verification.
struct Pending<'l> {
    gt: ParsedCaption,
    lexicon: Cow<'l, Lexicon>,
    groups: Vec<Vec<Candidate>>,
}

fn non_empty(v: Vec<HardNegative>) -> Result<Vec<HardNegative>, HnError> {
    if v.is_empty() {
        Err(HnError::NoFoilAvailable)
    } else {
        Ok(v)
    }
}

/// Runs every query for every type with a positive count, in parallel.
/// Rows come back in query order, then type order.
pub fn generate_all(
    generator: &HardNegGenerator,
    queries: &[HnQuery],
    config: &HnConfig,
) -> Vec<HnRow> {
    let types = config.counts.types();
    queries
        .par_iter()
        .flat_map_iter(|q| {
            types
                .iter()
                .map(|&t| generator.generate(q, t, config.counts.get(t), config.seed))
                .collect::<Vec<_>>()
        })
        .collect()
}
