use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::template::object_phrase;
use super::CaptionError;
use crate::io::read_jsonl_strict;
use crate::model::{ObjectId, SceneGraph};

pub const OBJECTS_PREFIX: &str = "OBJECTS: ";
pub const RELATIONS_PREFIX: &str = "RELATIONS: ";
pub const CAPTION_PREFIX: &str = "CAPTION:";
/// Examples required per complexity.
pub const FEW_SHOT_PER_N: usize = 5;

/// A hand-written caption for a subgraph of complexity `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub n: usize,
    pub graph: SceneGraph,
    pub caption: String,
}

/// Few-shot examples grouped by complexity.
#[derive(Debug, Clone, Default)]
pub struct FewShotBank {
    by_n: BTreeMap<usize, Vec<FewShotExample>>,
}

impl FewShotBank {
    pub fn new(examples: Vec<FewShotExample>) -> Self {
        let mut by_n: BTreeMap<usize, Vec<FewShotExample>> = BTreeMap::new();
        for e in examples {
            by_n.entry(e.n).or_default().push(e);
        }
        FewShotBank { by_n }
    }

    /// Reads JSONL lines `{"n", "graph", "caption"}`.
    pub fn load(path: &Path) -> Result<Self, CaptionError> {
        let examples = read_jsonl_strict(path).map_err(|e| CaptionError::Config(e.to_string()))?;
        Ok(FewShotBank::new(examples))
    }

    /// The first five examples for complexity `n`.
    pub fn examples_for(&self, n: usize) -> Result<&[FewShotExample], CaptionError> {
        match self.by_n.get(&n) {
            Some(v) if v.len() >= FEW_SHOT_PER_N => Ok(&v[..FEW_SHOT_PER_N]),
            Some(v) => Err(CaptionError::Config(format!(
                "few-shot bank has {} examples for n = {n}, need {FEW_SHOT_PER_N}",
                v.len()
            ))),
            None => Err(CaptionError::Config(format!(
                "few-shot bank has no examples for n = {n}"
            ))),
        }
    }

    pub fn complexities(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_n.keys().copied()
    }
}

/// Object names with numeric suffixes where a lemma repeats, in id order.
pub fn object_names(graph: &SceneGraph) -> BTreeMap<ObjectId, String> {
    let mut totals: HashMap<&str, usize> = HashMap::new();
    for o in graph.objects() {
        *totals.entry(o.lemma()).or_default() += 1;
    }
    let mut ids: Vec<ObjectId> = graph.objects().iter().map(|o| o.id).collect();
    ids.sort();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut names = BTreeMap::new();
    for id in ids {
        let lemma = graph.object(id).expect("listed").lemma();
        let name = if totals[lemma] > 1 {
            let k = seen.entry(lemma).or_default();
            *k += 1;
            format!("{lemma}{k}")
        } else {
            lemma.to_string()
        };
        names.insert(id, name);
    }
    names
}

/// "OBJECTS: tall and blue boy; green grass"
pub fn objects_line(graph: &SceneGraph) -> String {
    let names = object_names(graph);
    let entries: Vec<String> = names
        .iter()
        .map(|(id, name)| {
            let node = graph.object(*id).expect("named");
            let phrase = object_phrase(node);
            format!("{}{name}", &phrase[..phrase.len() - node.lemma().len()])
        })
        .collect();
    format!("{OBJECTS_PREFIX}{}", entries.join("; "))
}

/// "RELATIONS: boy on grass", or empty when there are no edges.
pub fn relations_line(graph: &SceneGraph) -> String {
    if graph.relationships().is_empty() {
        return String::new();
    }
    let names = object_names(graph);
    let clauses: Vec<String> = graph
        .relationships()
        .iter()
        .map(|e| {
            format!(
                "{} {} {}",
                names[&e.subject_id],
                e.relationship.lemma(),
                names[&e.object_id]
            )
        })
        .collect();
    format!("{RELATIONS_PREFIX}{}", clauses.join("; "))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub objects_line: String,
    pub relations_line: String,
    /// (graph description, caption) pairs.
    pub few_shot: Vec<(String, String)>,
}

fn describe(graph: &SceneGraph) -> String {
    let rel = relations_line(graph);
    if rel.is_empty() {
        objects_line(graph)
    } else {
        format!("{}\n{rel}", objects_line(graph))
    }
}

impl PromptSpec {
    /// Examples first, each followed by its caption, then the query with an
    /// open caption line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (desc, caption) in &self.few_shot {
            out.push_str(desc);
            out.push('\n');
            out.push_str(CAPTION_PREFIX);
            out.push(' ');
            out.push_str(caption);
            out.push_str("\n\n");
        }
        out.push_str(&self.objects_line);
        out.push('\n');
        if !self.relations_line.is_empty() {
            out.push_str(&self.relations_line);
            out.push('\n');
        }
        out.push_str(CAPTION_PREFIX);
        out
    }
}

pub fn build_prompt(graph: &SceneGraph, bank: &FewShotBank) -> Result<PromptSpec, CaptionError> {
    if graph.objects().is_empty() {
        return Err(CaptionError::EmptyGraph);
    }
    let few_shot = bank
        .examples_for(graph.atom_count())?
        .iter()
        .map(|e| (describe(&e.graph), e.caption.clone()))
        .collect();
    Ok(PromptSpec {
        objects_line: objects_line(graph),
        relations_line: relations_line(graph),
        few_shot,
    })
}
