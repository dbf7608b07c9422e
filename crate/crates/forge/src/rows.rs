//! JSONL row types exchanged between stages, and input loaders.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use forge_core::caption::CaptionOutcome;
use forge_core::eval::RetrievalItem;
use forge_core::hardneg::HnRow;
use forge_core::index::SplitLabel;
use forge_core::io::{read_lines, IoError, LoadReport};
use forge_core::model::vg::{VgImage, VgRegionImage};
use forge_core::sampler::SampledSubgraph;
use forge_core::{MetricsReport, Region, SceneGraph};

use crate::error::PipelineError;

/// A parsed region description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub caption_id: String,
    pub image_id: String,
    pub text: String,
    /// Absent when the caption did not parse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<SceneGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub caption_id: String,
    pub split: SplitLabel,
    pub image_id: String,
    pub text: String,
    pub graph: SceneGraph,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphRow {
    pub id: String,
    #[serde(flatten)]
    pub sample: SampledSubgraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRow {
    pub query_id: String,
    pub image_id: String,
    pub complexity: usize,
    #[serde(flatten)]
    pub outcome: CaptionOutcome,
}

impl CaptionRow {
    /// The caption text when it was accepted.
    pub fn accepted_text(&self) -> Option<&str> {
        match &self.outcome {
            CaptionOutcome::Accepted { text, .. } => Some(text),
            _ => None,
        }
    }
}

/// Which generalization test a query belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Systematicity,
    Productivity,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Systematicity, Task::Productivity];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Systematicity => "systematicity",
            Task::Productivity => "productivity",
        }
    }

    /// Image-side id of a query: a region for systematicity, a crop for
    /// productivity.
    pub fn image_key(self, query_id: &str) -> String {
        match self {
            Task::Systematicity => format!("region:{query_id}"),
            Task::Productivity => format!("crop:{query_id}"),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| PipelineError::Config(format!("unknown task {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HnOutputRow {
    pub task: Task,
    #[serde(flatten)]
    pub row: HnRow,
}

/// Common view of split rows and caption rows used to pick queries.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct QueryRow {
    #[serde(alias = "caption_id")]
    pub query_id: String,
    #[serde(default)]
    pub text: Option<String>,
    pub image_id: String,
    #[serde(default)]
    pub complexity: Option<usize>,
    #[serde(default)]
    pub split: Option<SplitLabel>,
    #[serde(default)]
    pub status: Option<String>,
}

impl QueryRow {
    /// Accepted caption text; split rows always qualify.
    pub fn usable_text(&self) -> Option<&str> {
        match self.status.as_deref() {
            None | Some("accepted") => self.text.as_deref(),
            Some(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Hn,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRow {
    pub task: Task,
    pub set: SetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    #[serde(flatten)]
    pub item: RetrievalItem,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRow {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub task: Task,
    pub report: MetricsReport,
}

/// Parses a JSON array, or one JSON value per line.
fn read_json_values<T: DeserializeOwned>(
    path: &Path,
) -> Result<(Vec<T>, LoadReport), PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::file(path, e))?;
    let mut report = LoadReport::default();
    let mut out = Vec::new();
    if text.trim_start().starts_with('[') {
        let values: Vec<serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| IoError::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        for (i, v) in values.into_iter().enumerate() {
            match serde_json::from_value(v) {
                Ok(x) => {
                    out.push(x);
                    report.loaded += 1;
                }
                Err(e) => report.skip(format!("{}: entry {i}: {e}", path.display())),
            }
        }
    } else {
        for (n, line) in read_lines(path)? {
            match serde_json::from_str(&line) {
                Ok(x) => {
                    out.push(x);
                    report.loaded += 1;
                }
                Err(e) => report.skip(format!("{}:{n}: {e}", path.display())),
            }
        }
    }
    Ok((out, report))
}

/// Loads Visual Genome style scene graphs. Malformed images are skipped
/// into the report.
pub fn load_scene_graphs(path: &Path) -> Result<(Vec<SceneGraph>, LoadReport), PipelineError> {
    let (images, mut report): (Vec<VgImage>, _) = read_json_values(path)?;
    let mut graphs = Vec::with_capacity(images.len());
    for img in images {
        match img.to_scene_graph() {
            Ok(g) => graphs.push(g),
            Err(e) => {
                report.loaded -= 1;
                report.skip(format!("image {}: {e}", img.image_id.as_string()));
            }
        }
    }
    for e in &report.errors {
        log::warn!("{e}");
    }
    Ok((graphs, report))
}

/// Scene graphs keyed by image id.
pub fn graphs_by_id(graphs: Vec<SceneGraph>) -> BTreeMap<String, SceneGraph> {
    graphs
        .into_iter()
        .map(|g| (g.image_id().to_string(), g))
        .collect()
}

/// A region description before parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionText {
    pub caption_id: String,
    pub image_id: String,
    pub text: String,
    pub region: Option<Region>,
}

pub fn load_regions(path: &Path) -> Result<(Vec<RegionText>, LoadReport), PipelineError> {
    let (images, mut report): (Vec<VgRegionImage>, _) = read_json_values(path)?;
    report.loaded = 0;
    let mut out = Vec::new();
    for img in &images {
        for r in img.region_captions() {
            match r {
                Ok(rc) => {
                    report.loaded += 1;
                    out.push(RegionText {
                        caption_id: rc.caption.caption_id,
                        image_id: rc.image_id,
                        text: rc.caption.text,
                        region: rc.region,
                    });
                }
                Err(e) => report.skip(format!("image {}: {e}", img.id.as_string())),
            }
        }
    }
    Ok((out, report))
}

/// Strict JSONL reader for stage outputs: a bad row is a schema error.
pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    Ok(forge_core::io::read_jsonl_strict(path)?)
}
