//! Seen-atom and seen-compound index over a training corpus, quality
//! filters, and split classification.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{write_atomic, IoError};
use crate::model::{Atom, AtomKind, CaptionRecord, Compound, ModelError, Region, SceneGraph};
use crate::scalar::{from_count, Ratio};

pub const ATOMS_FILE: &str = "atoms.txt";
pub const COMPOUNDS_FILE: &str = "compounds.txt";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{file}:{line}: {source}")]
    Malformed {
        file: String,
        line: usize,
        #[source]
        source: ModelError,
    },
    #[error("invalid filter policy: {0}")]
    Policy(String),
    #[error("record {0}: region given without image size")]
    RecordError(String),
}

/// Atoms and compounds observed in a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeenIndex {
    pub atoms: BTreeSet<Atom>,
    pub compounds: BTreeSet<Compound>,
    pub source_corpus: String,
    pub record_count: u64,
    /// Records that could not be read.
    pub skipped: u64,
}

impl SeenIndex {
    pub fn new(source_corpus: impl Into<String>) -> Self {
        SeenIndex {
            source_corpus: source_corpus.into(),
            ..Default::default()
        }
    }

    pub fn add(&mut self, graph: &SceneGraph) {
        self.atoms.extend(graph.atoms());
        self.compounds.extend(graph.compounds());
        self.record_count += 1;
    }

    /// Union with an index built over another shard.
    pub fn merge(&mut self, other: SeenIndex) {
        self.atoms.extend(other.atoms);
        self.compounds.extend(other.compounds);
        self.record_count += other.record_count;
        self.skipped += other.skipped;
    }

    pub fn seen_atom(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn seen_compound(&self, compound: &Compound) -> bool {
        self.compounds.contains(compound)
    }

    /// Writes `atoms.txt` and `compounds.txt`, sorted, into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        write_atomic(&dir.join(ATOMS_FILE), |w| {
            use std::io::Write;
            for a in &self.atoms {
                writeln!(w, "{}\t{}", a.kind().as_str(), a.lemma())?;
            }
            Ok(())
        })?;
        let mut lines: Vec<String> = self.compounds.iter().map(Compound::to_line).collect();
        lines.sort();
        write_atomic(&dir.join(COMPOUNDS_FILE), |w| {
            use std::io::Write;
            for l in &lines {
                writeln!(w, "{l}")?;
            }
            Ok(())
        })?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let mut index = SeenIndex::new(dir.display().to_string());
        let atoms_path = dir.join(ATOMS_FILE);
        let text = fs::read_to_string(&atoms_path).map_err(|e| IoError::io(&atoms_path, e))?;
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let malformed = |source| IndexError::Malformed {
                file: ATOMS_FILE.into(),
                line: i + 1,
                source,
            };
            let (kind, lemma) = line
                .split_once('\t')
                .ok_or_else(|| malformed(ModelError::InvalidAtom(line.into())))?;
            let kind = AtomKind::parse(kind)
                .ok_or_else(|| malformed(ModelError::InvalidAtom(line.into())))?;
            index
                .atoms
                .insert(Atom::new(lemma, kind).map_err(malformed)?);
        }
        let compounds_path = dir.join(COMPOUNDS_FILE);
        let text =
            fs::read_to_string(&compounds_path).map_err(|e| IoError::io(&compounds_path, e))?;
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let c = Compound::from_line(line).map_err(|source| IndexError::Malformed {
                file: COMPOUNDS_FILE.into(),
                line: i + 1,
                source,
            })?;
            index.atoms.extend(c.atoms().into_iter().cloned());
            index.compounds.insert(c);
        }
        Ok(index)
    }
}

/// Builds the index in one pass. Unreadable records are logged and counted
/// in [`SeenIndex::skipped`].
pub fn build_seen_index<I, E>(source_corpus: &str, corpus: I) -> SeenIndex
where
    I: IntoIterator<Item = Result<SceneGraph, E>>,
    E: fmt::Display,
{
    let mut index = SeenIndex::new(source_corpus);
    for record in corpus {
        match record {
            Ok(g) => index.add(&g),
            Err(e) => {
                log::warn!("skipping training record: {e}");
                index.skipped += 1;
            }
        }
    }
    index
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SplitLabel {
    SC,
    UC,
    UA,
}

impl SplitLabel {
    pub const ALL: [SplitLabel; 3] = [SplitLabel::SC, SplitLabel::UC, SplitLabel::UA];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::SC => "SC",
            SplitLabel::UC => "UC",
            SplitLabel::UA => "UA",
        }
    }
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// UA if any atom is unseen, else UC if any compound is unseen, else SC.
pub fn classify_split(graph: &SceneGraph, index: &SeenIndex) -> SplitLabel {
    if graph.atoms().iter().any(|a| !index.seen_atom(a)) {
        SplitLabel::UA
    } else if graph.compounds().iter().any(|c| !index.seen_compound(c)) {
        SplitLabel::UC
    } else {
        SplitLabel::SC
    }
}

/// Region and graph quality thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct FilterPolicy<T> {
    pub min_region_area: u64,
    pub min_image_fraction: T,
    /// Inclusive width / height bounds.
    pub aspect_ratio_range: (T, T),
    pub min_atoms: usize,
    pub min_compounds: usize,
    pub dedup_by_graph: bool,
}

impl<T: Ratio> Default for FilterPolicy<T> {
    fn default() -> Self {
        FilterPolicy {
            min_region_area: 40_000,
            min_image_fraction: from_count::<T>(1) / from_count(10),
            aspect_ratio_range: (from_count::<T>(1) / from_count(2), from_count(2)),
            min_atoms: 2,
            min_compounds: 1,
            dedup_by_graph: true,
        }
    }
}

impl<T: Ratio> FilterPolicy<T> {
    pub fn validate(&self) -> Result<(), IndexError> {
        let zero = T::zero();
        let (lo, hi) = self.aspect_ratio_range;
        if self.min_region_area == 0 || self.min_image_fraction <= zero || lo <= zero {
            return Err(IndexError::Policy("thresholds must be positive".into()));
        }
        if lo >= hi {
            return Err(IndexError::Policy(
                "aspect ratio lower bound must be below upper".into(),
            ));
        }
        if self.min_atoms == 0 || self.min_compounds == 0 {
            return Err(IndexError::Policy("graph minimums must be positive".into()));
        }
        Ok(())
    }

    /// Area, image-fraction and aspect-ratio checks.
    pub fn region_ok(&self, region: &Region, image_size: (u32, u32)) -> bool {
        let (lo, hi) = self.aspect_ratio_range;
        let aspect: T = region.aspect_ratio();
        region.area() >= self.min_region_area
            && region.image_fraction::<T>(image_size.0, image_size.1) >= self.min_image_fraction
            && aspect >= lo
            && aspect <= hi
    }

    pub fn graph_ok(&self, graph: &SceneGraph) -> bool {
        graph.atom_count() >= self.min_atoms && graph.compounds().len() >= self.min_compounds
    }
}

/// A test record: caption, its parsed graph and the region it describes.
#[derive(Debug, Clone)]
pub struct FilterRecord {
    pub caption: CaptionRecord,
    pub graph: SceneGraph,
    pub region: Option<Region>,
    pub image_size: Option<(u32, u32)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FilterReport {
    pub input: usize,
    pub kept: usize,
    pub dropped_region: usize,
    pub dropped_graph: usize,
    pub dropped_duplicate: usize,
    pub record_errors: usize,
}

/// Keeps records passing every check; with dedup on, the first record per
/// canonical graph signature wins.
pub fn filter_records<T, I>(
    records: I,
    policy: &FilterPolicy<T>,
) -> (Vec<FilterRecord>, FilterReport)
where
    T: Ratio,
    I: IntoIterator<Item = FilterRecord>,
{
    let mut report = FilterReport::default();
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    for rec in records {
        report.input += 1;
        if let Some(region) = &rec.region {
            match rec.image_size {
                None => {
                    log::warn!(
                        "{}",
                        IndexError::RecordError(rec.caption.caption_id.clone())
                    );
                    report.record_errors += 1;
                    continue;
                }
                Some(size) if !policy.region_ok(region, size) => {
                    report.dropped_region += 1;
                    continue;
                }
                Some(_) => {}
            }
        }
        if !policy.graph_ok(&rec.graph) {
            report.dropped_graph += 1;
            continue;
        }
        if policy.dedup_by_graph && !seen.insert(rec.graph.canonical().signature()) {
            report.dropped_duplicate += 1;
            continue;
        }
        kept.push(rec);
    }
    report.kept = kept.len();
    (kept, report)
}
