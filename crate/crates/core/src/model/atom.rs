use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Role of an atom in a scene graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomKind {
    Object,
    Attribute,
    Relationship,
}

impl AtomKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AtomKind::Object => "object",
            AtomKind::Attribute => "attribute",
            AtomKind::Relationship => "relationship",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "object" => Some(AtomKind::Object),
            "attribute" => Some(AtomKind::Attribute),
            "relationship" => Some(AtomKind::Relationship),
            _ => None,
        }
    }
}

impl fmt::Display for AtomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single visual concept: an object, an attribute or a relationship label.
///
/// Identity is `(kind, lemma)`; the surface form is carried along for text
/// rendering but never takes part in comparisons.
#[derive(Debug, Clone, Serialize)]
pub struct Atom {
    kind: AtomKind,
    lemma: String,
    surface: String,
}

impl Atom {
    /// Canonicalizes `surface` into an atom of the given kind.
    pub fn new(surface: &str, kind: AtomKind) -> Result<Self, ModelError> {
        canonicalize(surface, kind)
    }

    pub fn object(surface: &str) -> Result<Self, ModelError> {
        canonicalize(surface, AtomKind::Object)
    }

    pub fn attribute(surface: &str) -> Result<Self, ModelError> {
        canonicalize(surface, AtomKind::Attribute)
    }

    pub fn relationship(surface: &str) -> Result<Self, ModelError> {
        canonicalize(surface, AtomKind::Relationship)
    }

    pub fn kind(&self) -> AtomKind {
        self.kind
    }

    pub fn lemma(&self) -> &str {
        &self.lemma
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.lemma == other.lemma
    }
}

impl Eq for Atom {}

impl Hash for Atom {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.kind.hash(state);
        self.lemma.hash(state);
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        self.kind
            .cmp(&other.kind)
            .then_with(|| self.lemma.cmp(&other.lemma))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lemma)
    }
}

/// Irregular plurals and words whose trailing `s` is not a plural marker.
/// Every value here is a fixed point of [`singularize`].
const SINGULAR_EXCEPTIONS: &[(&str, &str)] = &[
    ("men", "man"),
    ("women", "woman"),
    ("children", "child"),
    ("people", "person"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("geese", "goose"),
    ("mice", "mouse"),
    ("oxen", "ox"),
    ("sheep", "sheep"),
    ("fish", "fish"),
    ("deer", "deer"),
    ("leaves", "leaf"),
    ("knives", "knife"),
    ("wives", "wife"),
    ("lives", "life"),
    ("shelves", "shelf"),
    ("wolves", "wolf"),
    ("halves", "half"),
    ("loaves", "loaf"),
    ("calves", "calf"),
    ("scarves", "scarf"),
    ("movies", "movie"),
    ("cookies", "cookie"),
    ("pies", "pie"),
    ("ties", "tie"),
    ("shoes", "shoe"),
    ("toes", "toe"),
    ("canoes", "canoe"),
    ("horses", "horse"),
    ("houses", "house"),
    ("buses", "bus"),
    ("lenses", "lens"),
    ("vases", "vase"),
    ("cases", "case"),
    ("bases", "base"),
    ("glasses", "glasses"),
    ("pants", "pants"),
    ("jeans", "jeans"),
    ("shorts", "shorts"),
    ("scissors", "scissors"),
    ("clothes", "clothes"),
    ("news", "news"),
    ("species", "species"),
    ("series", "series"),
    ("skis", "ski"),
    ("taxis", "taxi"),
    ("kiwis", "kiwi"),
    ("tennis", "tennis"),
    ("lens", "lens"),
    ("gas", "gas"),
    ("bus", "bus"),
    ("grass", "grass"),
    ("glass", "glass"),
    ("dress", "dress"),
    ("canvas", "canvas"),
    ("christmas", "christmas"),
    ("physics", "physics"),
];

fn exception(word: &str) -> Option<&'static str> {
    SINGULAR_EXCEPTIONS
        .iter()
        .find(|(plural, _)| *plural == word)
        .map(|(_, singular)| *singular)
}

/// Reduces a single lowercase noun to its singular form by suffix rules.
pub fn singularize(word: &str) -> String {
    if let Some(s) = exception(word) {
        return s.to_string();
    }
    if SINGULAR_EXCEPTIONS.iter().any(|(_, s)| *s == word) {
        return word.to_string();
    }
    let n = word.len();
    if n <= 3 || !word.is_ascii() {
        return word.to_string();
    }
    if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        // "ies" preceded by a consonant: puppies -> puppy
        if stem.len() >= 2 && !stem.ends_with(['a', 'e', 'i', 'o', 'u']) {
            return format!("{stem}y");
        }
        return format!("{stem}ie");
    }
    for suffix in ["sses", "shes", "ches", "xes"] {
        if word.ends_with(suffix) {
            return word[..n - 2].to_string();
        }
    }
    if let Some(stem) = word.strip_suffix("oes") {
        return format!("{stem}o");
    }
    if let Some(stem) = word.strip_suffix('s') {
        return stem.to_string();
    }
    word.to_string()
}

fn normalize_whitespace(surface: &str) -> String {
    surface
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Maps a surface string to its canonical atom.
///
/// All kinds are lowercased with whitespace trimmed and collapsed. Objects
/// additionally have their head (last) word singularized.
pub fn canonicalize(surface: &str, kind: AtomKind) -> Result<Atom, ModelError> {
    let mut lemma = normalize_whitespace(surface);
    if lemma.is_empty() {
        return Err(ModelError::InvalidAtom(surface.to_string()));
    }
    if kind == AtomKind::Object {
        let (head_start, head) = match lemma.rfind(' ') {
            Some(i) => (i + 1, &lemma[i + 1..]),
            None => (0, lemma.as_str()),
        };
        let singular = singularize(head);
        lemma.replace_range(head_start.., &singular);
    }
    Ok(Atom {
        kind,
        lemma,
        surface: surface.trim().to_string(),
    })
}
