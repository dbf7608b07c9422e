//! Reader for the WordNet 3.x database files (`index.<pos>` and
//! `data.<pos>`).
//!
//! Synsets are keyed by the offset field at the start of each data line, so
//! trimmed or hand-written files need not keep byte offsets consistent.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use super::LexicalError;
use crate::model::AtomKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WnPos {
    Noun,
    Verb,
    Adj,
}

impl WnPos {
    const ALL: [WnPos; 3] = [WnPos::Noun, WnPos::Verb, WnPos::Adj];

    fn suffix(self) -> &'static str {
        match self {
            WnPos::Noun => "noun",
            WnPos::Verb => "verb",
            WnPos::Adj => "adj",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "n" => Some(WnPos::Noun),
            "v" => Some(WnPos::Verb),
            "a" | "s" => Some(WnPos::Adj),
            _ => None,
        }
    }
}

type SynsetKey = (WnPos, u64);

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pointer {
    symbol: String,
    target: SynsetKey,
    /// 1-based word numbers; 0 means the whole synset.
    source_word: usize,
    target_word: usize,
}

#[derive(Debug, Clone, Default)]
struct Synset {
    words: Vec<String>,
    satellite: bool,
    pointers: Vec<Pointer>,
}

/// In-memory WordNet database.
#[derive(Debug, Clone, Default)]
pub struct WordNet {
    senses: HashMap<(WnPos, String), Vec<u64>>,
    synsets: HashMap<SynsetKey, Synset>,
    hyponyms: HashMap<SynsetKey, Vec<SynsetKey>>,
}

fn clean_word(raw: &str) -> String {
    let base = raw.split('(').next().unwrap_or(raw);
    base.replace('_', " ").to_lowercase()
}

fn key_of(lemma: &str) -> String {
    lemma.trim().to_lowercase()
}

impl WordNet {
    /// Loads every `index.<pos>`/`data.<pos>` pair in `dir`; `None` when
    /// there are none.
    pub fn load(dir: &Path) -> Result<Option<Self>, LexicalError> {
        let mut wn = WordNet::default();
        let mut any = false;
        for pos in WnPos::ALL {
            let index = dir.join(format!("index.{}", pos.suffix()));
            let data = dir.join(format!("data.{}", pos.suffix()));
            if !index.exists() || !data.exists() {
                continue;
            }
            any = true;
            wn.read_index(pos, &read(&index)?, &index.display().to_string())?;
            wn.read_data(pos, &read(&data)?, &data.display().to_string())?;
        }
        if !any {
            return Ok(None);
        }
        wn.link_hyponyms();
        Ok(Some(wn))
    }

    /// Builds a database from file contents, keyed by part of speech.
    pub fn from_texts(files: &[(WnPos, &str, &str)]) -> Result<Self, LexicalError> {
        let mut wn = WordNet::default();
        for (pos, index, data) in files {
            wn.read_index(*pos, index, "index")?;
            wn.read_data(*pos, data, "data")?;
        }
        wn.link_hyponyms();
        Ok(wn)
    }

    fn read_index(&mut self, pos: WnPos, text: &str, file: &str) -> Result<(), LexicalError> {
        for (i, line) in text.lines().enumerate() {
            if line.starts_with(' ') || line.trim().is_empty() {
                continue;
            }
            let malformed = || LexicalError::Malformed {
                file: file.to_string(),
                line: i + 1,
                message: "bad index line".into(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            let synset_cnt: usize = f
                .get(2)
                .and_then(|s| s.parse().ok())
                .ok_or_else(malformed)?;
            if f.len() < 4 + synset_cnt {
                return Err(malformed());
            }
            let offsets = f[f.len() - synset_cnt..]
                .iter()
                .map(|s| s.parse::<u64>().map_err(|_| malformed()))
                .collect::<Result<Vec<_>, _>>()?;
            self.senses.insert((pos, clean_word(f[0])), offsets);
        }
        Ok(())
    }

    fn read_data(&mut self, pos: WnPos, text: &str, file: &str) -> Result<(), LexicalError> {
        for (i, line) in text.lines().enumerate() {
            if line.starts_with(' ') || line.trim().is_empty() {
                continue;
            }
            let malformed = |what: &str| LexicalError::Malformed {
                file: file.to_string(),
                line: i + 1,
                message: what.to_string(),
            };
            let body = line.split(" | ").next().unwrap_or(line);
            let f: Vec<&str> = body.split_whitespace().collect();
            if f.len() < 4 {
                return Err(malformed("short data line"));
            }
            let offset: u64 = f[0].parse().map_err(|_| malformed("bad offset"))?;
            let satellite = f[2] == "s";
            let w_cnt = usize::from_str_radix(f[3], 16).map_err(|_| malformed("bad word count"))?;
            let mut k = 4;
            let mut words = Vec::with_capacity(w_cnt);
            for _ in 0..w_cnt {
                let w = f.get(k).ok_or_else(|| malformed("missing word"))?;
                words.push(clean_word(w));
                k += 2;
            }
            let p_cnt: usize = f
                .get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| malformed("bad pointer count"))?;
            k += 1;
            let mut pointers = Vec::with_capacity(p_cnt);
            for _ in 0..p_cnt {
                let [symbol, target, tpos, st] =
                    [f.get(k), f.get(k + 1), f.get(k + 2), f.get(k + 3)];
                let (Some(symbol), Some(target), Some(tpos), Some(st)) = (symbol, target, tpos, st)
                else {
                    return Err(malformed("truncated pointer"));
                };
                k += 4;
                let Some(tpos) = WnPos::from_tag(tpos) else {
                    continue;
                };
                let target: u64 = target
                    .parse()
                    .map_err(|_| malformed("bad pointer offset"))?;
                let st = u16::from_str_radix(st, 16).map_err(|_| malformed("bad source/target"))?;
                pointers.push(Pointer {
                    symbol: symbol.to_string(),
                    target: (tpos, target),
                    source_word: usize::from(st >> 8),
                    target_word: usize::from(st & 0xff),
                });
            }
            self.synsets.insert(
                (pos, offset),
                Synset {
                    words,
                    satellite,
                    pointers,
                },
            );
        }
        Ok(())
    }

    fn link_hyponyms(&mut self) {
        self.hyponyms.clear();
        let mut keys: Vec<&SynsetKey> = self.synsets.keys().collect();
        keys.sort();
        for key in keys {
            for p in &self.synsets[key].pointers {
                if is_hypernym(&p.symbol) {
                    self.hyponyms.entry(p.target).or_default().push(*key);
                }
            }
        }
    }

    fn senses(&self, pos: WnPos, lemma: &str) -> Vec<SynsetKey> {
        self.senses
            .get(&(pos, key_of(lemma)))
            .map(|v| {
                v.iter()
                    .map(|&o| (pos, o))
                    .filter(|k| self.synsets.contains_key(k))
                    .collect()
            })
            .unwrap_or_default()
    }

    fn word_index(&self, key: SynsetKey, lemma: &str) -> Option<usize> {
        let lemma = key_of(lemma);
        self.synsets
            .get(&key)?
            .words
            .iter()
            .position(|w| *w == lemma)
            .map(|i| i + 1)
    }

    fn direct_antonyms(&self, key: SynsetKey, word: Option<usize>) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let Some(s) = self.synsets.get(&key) else {
            return out;
        };
        for p in s.pointers.iter().filter(|p| p.symbol == "!") {
            if p.source_word != 0 && word.is_some_and(|w| w != p.source_word) {
                continue;
            }
            if let Some(t) = self.synsets.get(&p.target) {
                if p.target_word == 0 {
                    out.extend(t.words.iter().cloned());
                } else if let Some(w) = t.words.get(p.target_word - 1) {
                    out.insert(w.clone());
                }
            }
        }
        out
    }

    /// Direct antonyms of every sense; adjective satellites inherit the
    /// antonyms of their head synset.
    pub fn antonyms(&self, lemma: &str, kind: AtomKind) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for pos in antonym_pos(kind) {
            for key in self.senses(*pos, lemma) {
                let direct = self.direct_antonyms(key, self.word_index(key, lemma));
                if direct.is_empty() && self.synsets[&key].satellite {
                    for p in self.synsets[&key]
                        .pointers
                        .iter()
                        .filter(|p| p.symbol == "&")
                    {
                        out.extend(self.direct_antonyms(p.target, None));
                    }
                }
                out.extend(direct);
            }
        }
        out
    }

    fn hypernyms(&self, key: SynsetKey) -> Vec<SynsetKey> {
        self.synsets
            .get(&key)
            .map(|s| {
                s.pointers
                    .iter()
                    .filter(|p| is_hypernym(&p.symbol) && self.synsets.contains_key(&p.target))
                    .map(|p| p.target)
                    .collect()
            })
            .unwrap_or_default()
    }

    fn first_word(&self, key: SynsetKey) -> String {
        self.synsets[&key]
            .words
            .first()
            .cloned()
            .unwrap_or_default()
    }

    /// Every path from each sense up to a root.
    pub fn hypernym_chains(&self, lemma: &str, kind: AtomKind) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for pos in taxonomy_pos(kind) {
            for key in self.senses(*pos, lemma) {
                let mut stack = vec![vec![key]];
                while let Some(path) = stack.pop() {
                    let last = *path.last().expect("non-empty");
                    let ups: Vec<SynsetKey> = self
                        .hypernyms(last)
                        .into_iter()
                        .filter(|h| !path.contains(h))
                        .collect();
                    if ups.is_empty() {
                        out.push(path.iter().map(|k| self.first_word(*k)).collect());
                    }
                    for h in ups.into_iter().rev() {
                        let mut next = path.clone();
                        next.push(h);
                        stack.push(next);
                    }
                }
            }
        }
        out
    }

    /// Grandchildren of the grand-hypernyms of the lemma's first sense.
    pub fn cousins(&self, lemma: &str, kind: AtomKind) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for pos in taxonomy_pos(kind) {
            let Some(&first) = self.senses(*pos, lemma).first() else {
                continue;
            };
            let own: BTreeSet<&String> = self.synsets[&first].words.iter().collect();
            let grand: BTreeSet<SynsetKey> = self
                .hypernyms(first)
                .into_iter()
                .flat_map(|h| self.hypernyms(h))
                .collect();
            for g in grand {
                for child in self.hyponyms.get(&g).into_iter().flatten() {
                    for grandchild in self.hyponyms.get(child).into_iter().flatten() {
                        for w in &self.synsets[grandchild].words {
                            if !own.contains(w) {
                                out.insert(w.clone());
                            }
                        }
                    }
                }
            }
        }
        out.remove(&key_of(lemma));
        out
    }
}

fn is_hypernym(symbol: &str) -> bool {
    symbol == "@" || symbol == "@i"
}

fn antonym_pos(kind: AtomKind) -> &'static [WnPos] {
    match kind {
        AtomKind::Object => &[WnPos::Noun],
        AtomKind::Attribute => &[WnPos::Adj],
        AtomKind::Relationship => &[WnPos::Verb, WnPos::Adj],
    }
}

/// Adjectives have no hypernyms; attribute taxonomy comes from noun senses
/// ("pink" the color).
fn taxonomy_pos(kind: AtomKind) -> &'static [WnPos] {
    match kind {
        AtomKind::Object | AtomKind::Attribute => &[WnPos::Noun],
        AtomKind::Relationship => &[WnPos::Verb],
    }
}

fn read(path: &Path) -> Result<String, LexicalError> {
    fs::read_to_string(path).map_err(|source| LexicalError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const INDEX_NOUN: &str = "  1 license header line\n\
        entity n 1 1 ~ 1 0 00000001\n\
        vehicle n 1 2 @ ~ 1 0 00000002\n\
        car n 1 1 @ 1 0 00000003\n\
        auto n 1 1 @ 1 0 00000003\n\
        truck n 1 1 @ 1 0 00000004\n\
        plaything n 1 2 @ ~ 1 0 00000005\n\
        toy n 1 1 @ 1 0 00000006\n\
        color n 1 2 @ ~ 1 0 00000010\n\
        chromatic_color n 1 2 @ ~ 1 0 00000011\n\
        pink n 1 1 @ 1 0 00000012\n\
        blue n 1 1 @ 1 0 00000013\n";

    const DATA_NOUN: &str = "  1 license header line\n\
        00000001 03 n 01 entity 0 002 ~ 00000002 n 0000 ~ 00000005 n 0000 | that which exists\n\
        00000002 06 n 01 vehicle 0 002 @ 00000001 n 0000 ~ 00000003 n 0000 | conveyance\n\
        00000003 06 n 02 car 0 auto 0 001 @ 00000002 n 0000 | motor vehicle\n\
        00000004 06 n 01 truck 0 001 @ 00000002 n 0000 | hauler\n\
        00000005 06 n 01 plaything 0 002 @ 00000001 n 0000 ~ 00000006 n 0000 | toy\n\
        00000006 06 n 01 toy 0 001 @ 00000005 n 0000 | a plaything\n\
        00000010 07 n 01 color 0 001 ~ 00000011 n 0000 | hue\n\
        00000011 07 n 01 chromatic_color 0 002 @ 00000010 n 0000 ~ 00000012 n 0000 | hue\n\
        00000012 07 n 01 pink 0 001 @ 00000011 n 0000 | a color\n\
        00000013 07 n 01 blue 0 001 @ 00000011 n 0000 | a color\n";

    const INDEX_ADJ: &str = "black a 1 1 ! 1 0 00000100\n\
        white a 1 1 ! 1 0 00000101\n\
        jet-black a 1 1 & 1 0 00000102\n";

    const DATA_ADJ: &str = "00000100 00 a 01 black 0 001 ! 00000101 a 0101 | dark\n\
        00000101 00 a 01 white 0 001 ! 00000100 a 0101 | light\n\
        00000102 00 s 01 jet-black 0 001 & 00000100 a 0000 | very black\n";

    fn wn() -> WordNet {
        WordNet::from_texts(&[
            (WnPos::Noun, INDEX_NOUN, DATA_NOUN),
            (WnPos::Adj, INDEX_ADJ, DATA_ADJ),
        ])
        .unwrap()
    }

    #[test]
    fn antonyms_direct_and_satellite() {
        let wn = wn();
        assert_eq!(
            wn.antonyms("black", AtomKind::Attribute),
            BTreeSet::from(["white".to_string()])
        );
        assert_eq!(
            wn.antonyms("white", AtomKind::Attribute),
            BTreeSet::from(["black".to_string()])
        );
        assert_eq!(
            wn.antonyms("jet-black", AtomKind::Attribute),
            BTreeSet::from(["white".to_string()])
        );
        assert!(wn.antonyms("car", AtomKind::Object).is_empty());
    }

    #[test]
    fn chains_collapse_synsets() {
        let wn = wn();
        assert_eq!(
            wn.hypernym_chains("auto", AtomKind::Object),
            vec![vec!["car", "vehicle", "entity"]]
        );
    }

    #[test]
    fn cousins_share_grand_hypernym() {
        let wn = wn();
        let c = wn.cousins("car", AtomKind::Object);
        assert!(c.contains("toy") && c.contains("truck"));
        assert!(!c.contains("car") && !c.contains("auto"));
        let c = wn.cousins("pink", AtomKind::Attribute);
        assert_eq!(c, BTreeSet::from(["blue".to_string()]));
    }
}
