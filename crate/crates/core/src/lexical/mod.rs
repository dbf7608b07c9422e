//! Lexical relations used to pick foils: antonyms, hypernym chains and
//! cousins (words sharing a grand-hypernym, the ancestor two levels up).

mod wordnet;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

pub use wordnet::{WnPos, WordNet};

use crate::model::AtomKind;

pub const OVERRIDES_FILE: &str = "overrides.tsv";

#[derive(Debug, Error)]
pub enum LexicalError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("no lexical data in {0}")]
    Empty(String),
}

pub trait LexicalResource: Send + Sync {
    fn antonyms(&self, lemma: &str, kind: AtomKind) -> BTreeSet<String>;

    /// Paths from a sense of `lemma` up to a root; each synset is
    /// represented by its first word.
    fn hypernym_chains(&self, lemma: &str, kind: AtomKind) -> Vec<Vec<String>>;

    /// Words two levels below a grand-hypernym of `lemma`, excluding the
    /// lemma and its synonyms.
    fn cousins(&self, lemma: &str, kind: AtomKind) -> BTreeSet<String>;
}

/// Hand-written relations, read from `relation<TAB>kind<TAB>lemma<TAB>other`
/// lines where relation is `antonym` or `cousin`. Both relations are
/// symmetric.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    antonyms: BTreeMap<(AtomKind, String), BTreeSet<String>>,
    cousins: BTreeMap<(AtomKind, String), BTreeSet<String>>,
}

impl Overrides {
    pub fn add_antonym(&mut self, kind: AtomKind, a: &str, b: &str) {
        insert_pair(&mut self.antonyms, kind, a, b);
    }

    pub fn add_cousin(&mut self, kind: AtomKind, a: &str, b: &str) {
        insert_pair(&mut self.cousins, kind, a, b);
    }

    pub fn parse(text: &str, file: &str) -> Result<Self, LexicalError> {
        let mut out = Overrides::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: &str| LexicalError::Malformed {
                file: file.to_string(),
                line: i + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [relation, kind, a, b] = fields[..] else {
                return Err(malformed("expected four tab-separated fields"));
            };
            let kind = AtomKind::parse(kind).ok_or_else(|| malformed("unknown atom kind"))?;
            match relation {
                "antonym" => out.add_antonym(kind, a, b),
                "cousin" => out.add_cousin(kind, a, b),
                _ => return Err(malformed("relation must be antonym or cousin")),
            }
        }
        Ok(out)
    }

    pub fn is_empty(&self) -> bool {
        self.antonyms.is_empty() && self.cousins.is_empty()
    }
}

fn norm(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn insert_pair(
    map: &mut BTreeMap<(AtomKind, String), BTreeSet<String>>,
    kind: AtomKind,
    a: &str,
    b: &str,
) {
    let (a, b) = (norm(a), norm(b));
    if a == b {
        return;
    }
    map.entry((kind, a.clone())).or_default().insert(b.clone());
    map.entry((kind, b)).or_default().insert(a);
}

/// WordNet (when present) plus overrides.
#[derive(Debug, Clone, Default)]
pub struct LexicalDb {
    pub wordnet: Option<WordNet>,
    pub overrides: Overrides,
}

impl LexicalDb {
    /// Loads the WordNet database files and `overrides.tsv` found in `dir`.
    /// At least one of the two must be present.
    pub fn load(dir: &Path) -> Result<Self, LexicalError> {
        if !dir.is_dir() {
            return Err(LexicalError::Io {
                path: dir.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
            });
        }
        let wordnet = WordNet::load(dir)?;
        let path = dir.join(OVERRIDES_FILE);
        let overrides = if path.exists() {
            let text = fs::read_to_string(&path).map_err(|source| LexicalError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Overrides::parse(&text, OVERRIDES_FILE)?
        } else {
            Overrides::default()
        };
        if wordnet.is_none() && overrides.is_empty() {
            return Err(LexicalError::Empty(dir.display().to_string()));
        }
        Ok(LexicalDb { wordnet, overrides })
    }

    pub fn from_overrides(overrides: Overrides) -> Self {
        LexicalDb {
            wordnet: None,
            overrides,
        }
    }
}

impl LexicalResource for LexicalDb {
    fn antonyms(&self, lemma: &str, kind: AtomKind) -> BTreeSet<String> {
        let lemma = norm(lemma);
        let mut out = self
            .overrides
            .antonyms
            .get(&(kind, lemma.clone()))
            .cloned()
            .unwrap_or_default();
        if let Some(wn) = &self.wordnet {
            out.extend(wn.antonyms(&lemma, kind));
        }
        out.remove(&lemma);
        out
    }

    fn hypernym_chains(&self, lemma: &str, kind: AtomKind) -> Vec<Vec<String>> {
        self.wordnet
            .as_ref()
            .map(|wn| wn.hypernym_chains(&norm(lemma), kind))
            .unwrap_or_default()
    }

    fn cousins(&self, lemma: &str, kind: AtomKind) -> BTreeSet<String> {
        let lemma = norm(lemma);
        let mut out = self
            .overrides
            .cousins
            .get(&(kind, lemma.clone()))
            .cloned()
            .unwrap_or_default();
        if let Some(wn) = &self.wordnet {
            out.extend(wn.cousins(&lemma, kind));
        }
        out.remove(&lemma);
        out
    }
}
