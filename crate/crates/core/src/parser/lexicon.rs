use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::ParseError;
use crate::model::{singularize, SceneGraph};

const BUNDLED_NOUNS: &str = include_str!("../../data/lexicon/nouns.txt");
const BUNDLED_ADJECTIVES: &str = include_str!("../../data/lexicon/adjectives.txt");
const BUNDLED_PREPOSITIONS: &str = include_str!("../../data/lexicon/prepositions.txt");
const BUNDLED_VERBS: &str = include_str!("../../data/lexicon/verbs.txt");

/// File names inside a lexicon directory.
pub const LEXICON_FILES: [&str; 4] = [
    "nouns.txt",
    "adjectives.txt",
    "prepositions.txt",
    "verbs.txt",
];

/// Parts of speech a phrase may take.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PosSet {
    pub noun: bool,
    pub adjective: bool,
    pub preposition: bool,
    pub verb: bool,
}

impl PosSet {
    pub fn is_empty(&self) -> bool {
        !(self.noun || self.adjective || self.preposition || self.verb)
    }

    /// Can open or extend a noun phrase. Prepositions never do.
    pub fn nominal(&self) -> bool {
        !self.preposition && (self.noun || self.adjective)
    }

    pub fn relational(&self) -> bool {
        self.preposition || (self.verb && !self.noun && !self.adjective)
    }
}

/// Word lists backing part-of-speech lookup.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    nouns: HashSet<String>,
    adjectives: HashSet<String>,
    prepositions: HashSet<String>,
    verbs: HashSet<String>,
    max_words: usize,
    source: Option<PathBuf>,
}

fn entries(text: &str) -> impl Iterator<Item = String> + '_ {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
                .to_lowercase()
        })
}

impl Lexicon {
    pub fn from_lists(nouns: &str, adjectives: &str, prepositions: &str, verbs: &str) -> Self {
        let mut lex = Lexicon::default();
        lex.nouns = entries(nouns).map(|n| singular_phrase(&n)).collect();
        lex.adjectives = entries(adjectives).collect();
        lex.prepositions = entries(prepositions).collect();
        lex.verbs = entries(verbs).collect();
        lex.max_words = [&lex.nouns, &lex.adjectives, &lex.prepositions, &lex.verbs]
            .iter()
            .flat_map(|set| set.iter())
            .map(|e| e.split(' ').count())
            .max()
            .unwrap_or(1);
        lex
    }

    /// The word lists shipped with the crate.
    pub fn bundled() -> Self {
        Lexicon::from_lists(
            BUNDLED_NOUNS,
            BUNDLED_ADJECTIVES,
            BUNDLED_PREPOSITIONS,
            BUNDLED_VERBS,
        )
    }

    /// Loads `nouns.txt`, `adjectives.txt`, `prepositions.txt` and
    /// `verbs.txt` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, ParseError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path)
                .map_err(|e| ParseError::Lexicon(format!("{}: {e}", path.display())))
        };
        let mut lex = Lexicon::from_lists(
            &read(LEXICON_FILES[0])?,
            &read(LEXICON_FILES[1])?,
            &read(LEXICON_FILES[2])?,
            &read(LEXICON_FILES[3])?,
        );
        lex.source = Some(dir.to_path_buf());
        Ok(lex)
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    /// Longest entry length in words.
    pub fn max_words(&self) -> usize {
        self.max_words.max(1)
    }

    pub fn add_noun(&mut self, lemma: &str) {
        self.nouns.insert(singular_phrase(&lemma.to_lowercase()));
        self.max_words = self.max_words.max(lemma.split_whitespace().count());
    }

    pub fn add_adjective(&mut self, lemma: &str) {
        self.adjectives.insert(lemma.to_lowercase());
        self.max_words = self.max_words.max(lemma.split_whitespace().count());
    }

    pub fn add_preposition(&mut self, lemma: &str) {
        self.prepositions.insert(lemma.to_lowercase());
        self.max_words = self.max_words.max(lemma.split_whitespace().count());
    }

    pub fn add_verb(&mut self, lemma: &str) {
        self.verbs.insert(lemma.to_lowercase());
        self.max_words = self.max_words.max(lemma.split_whitespace().count());
    }

    /// Adds the graph's object names as nouns, attributes as adjectives and
    /// unknown predicates as prepositions.
    pub fn learn(&mut self, graph: &SceneGraph) {
        for obj in graph.objects() {
            if !self.lookup(obj.lemma()).noun {
                self.add_noun(obj.lemma());
            }
            for a in &obj.attributes {
                if !self.lookup(a.lemma()).adjective {
                    self.add_adjective(a.lemma());
                }
            }
        }
        for e in graph.relationships() {
            if self.lookup(e.relationship.lemma()).is_empty() {
                self.add_preposition(e.relationship.lemma());
            }
        }
    }

    /// Writes the four word lists to `dir`, one sorted entry per line.
    pub fn save(&self, dir: &Path) -> Result<(), ParseError> {
        let err = |path: &Path, e: std::io::Error| {
            ParseError::Lexicon(format!("{}: {e}", path.display()))
        };
        fs::create_dir_all(dir).map_err(|e| err(dir, e))?;
        let sets = [
            &self.nouns,
            &self.adjectives,
            &self.prepositions,
            &self.verbs,
        ];
        for (name, set) in LEXICON_FILES.iter().zip(sets) {
            let mut words: Vec<&String> = set.iter().collect();
            words.sort();
            let mut body = String::new();
            for w in words {
                body.push_str(w);
                body.push('\n');
            }
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| err(&path, e))?;
        }
        Ok(())
    }

    /// Categories of a lowercase, single-space-joined phrase. Nouns match
    /// in plural form as well.
    pub fn lookup(&self, phrase: &str) -> PosSet {
        PosSet {
            noun: self.nouns.contains(phrase) || self.nouns.contains(&singular_phrase(phrase)),
            adjective: self.adjectives.contains(phrase),
            preposition: self.prepositions.contains(phrase),
            verb: self.verbs.contains(phrase),
        }
    }

    /// Lookup with suffix-rule fallback for unknown single words.
    pub fn tag_word(&self, word: &str) -> PosSet {
        let pos = self.lookup(word);
        if !pos.is_empty() {
            return pos;
        }
        let n = word.chars().count();
        let mut guess = PosSet::default();
        if n > 4 && word.ends_with("ing") {
            guess.verb = true;
        } else if n > 4
            && ["ous", "ful", "ive", "less", "able", "ible", "ish"]
                .iter()
                .any(|s| word.ends_with(s))
        {
            guess.adjective = true;
        }
        guess
    }
}

fn singular_phrase(phrase: &str) -> String {
    match phrase.rsplit_once(' ') {
        Some((head, last)) => format!("{head} {}", singularize(last)),
        None => singularize(phrase),
    }
}
