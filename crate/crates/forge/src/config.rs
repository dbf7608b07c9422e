//! TOML pipeline configuration.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use forge_core::caption::CaptionConfig;
use forge_core::hardneg::HnCounts;
use forge_core::{FilterPolicy, WalkConfig};

use crate::error::PipelineError;

/// Pipeline stages in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Parse,
    ParserEval,
    Index,
    Split,
    Sample,
    Caption,
    Hardneg,
    Eval,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Parse,
        Stage::ParserEval,
        Stage::Index,
        Stage::Split,
        Stage::Sample,
        Stage::Caption,
        Stage::Hardneg,
        Stage::Eval,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::ParserEval => "parser-eval",
            Stage::Index => "index",
            Stage::Split => "split",
            Stage::Sample => "sample",
            Stage::Caption => "caption",
            Stage::Hardneg => "hardneg",
            Stage::Eval => "eval",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| PipelineError::Config(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Visual Genome style scene graphs (JSON array or JSON lines).
    pub scene_graphs: PathBuf,
    /// Visual Genome style region descriptions: the test captions.
    pub regions: PathBuf,
    /// Training captions, JSONL or TSV.
    pub train_captions: PathBuf,
    /// WordNet database files and/or `overrides.tsv`.
    #[serde(default)]
    pub wordnet: Option<PathBuf>,
    #[serde(default)]
    pub few_shot: Option<PathBuf>,
    /// Captions with gold graphs for the parser check.
    #[serde(default)]
    pub parser_gold: Option<PathBuf>,
    /// Base word lists; the bundled ones otherwise.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
}

/// Overrides of the default filter thresholds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub min_region_area: Option<u64>,
    pub min_image_fraction: Option<f64>,
    pub aspect_ratio_range: Option<(f64, f64)>,
    pub min_atoms: Option<usize>,
    pub min_compounds: Option<usize>,
    pub dedup_by_graph: Option<bool>,
}

impl FilterSection {
    pub fn policy(&self) -> FilterPolicy {
        let d = FilterPolicy::default();
        FilterPolicy {
            min_region_area: self.min_region_area.unwrap_or(d.min_region_area),
            min_image_fraction: self.min_image_fraction.unwrap_or(d.min_image_fraction),
            aspect_ratio_range: self.aspect_ratio_range.unwrap_or(d.aspect_ratio_range),
            min_atoms: self.min_atoms.unwrap_or(d.min_atoms),
            min_compounds: self.min_compounds.unwrap_or(d.min_compounds),
            dedup_by_graph: self.dedup_by_graph.unwrap_or(d.dedup_by_graph),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSection {
    pub complexities: Vec<usize>,
    pub samples_per_image: usize,
    pub max_retries: usize,
    pub max_overlap: f64,
}

impl Default for WalkSection {
    fn default() -> Self {
        let d = WalkConfig::default();
        WalkSection {
            complexities: (4..=12).collect(),
            samples_per_image: d.samples_per_image_per_n,
            max_retries: d.max_retries,
            max_overlap: d.max_overlap,
        }
    }
}

impl WalkSection {
    pub fn config(&self, seed: u64) -> WalkConfig {
        WalkConfig {
            n: self.complexities.first().copied().unwrap_or(4),
            max_retries: self.max_retries,
            seed,
            samples_per_image_per_n: self.samples_per_image,
            max_overlap: self.max_overlap,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    /// Template captions at every complexity.
    #[default]
    Template,
    /// Offline client echoing the template through the prompt path.
    Mock,
    /// HTTP client configured from the environment.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptionSection {
    pub engine: EngineChoice,
    pub cutover: usize,
    pub max_tokens: usize,
    pub max_in_flight: usize,
    pub strict_filter: bool,
}

impl Default for CaptionSection {
    fn default() -> Self {
        let d = CaptionConfig::default();
        CaptionSection {
            engine: EngineChoice::Template,
            cutover: d.cutover,
            max_tokens: d.max_tokens,
            max_in_flight: d.max_in_flight,
            strict_filter: d.strict_filter,
        }
    }
}

impl CaptionSection {
    pub fn config(&self) -> CaptionConfig {
        CaptionConfig {
            cutover: self.cutover,
            max_tokens: self.max_tokens,
            max_in_flight: self.max_in_flight,
            strict_filter: self.strict_filter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardnegSection {
    pub systematicity: HnCounts,
    pub productivity: HnCounts,
}

impl Default for HardnegSection {
    fn default() -> Self {
        HardnegSection {
            systematicity: HnCounts::systematicity(),
            productivity: HnCounts::productivity(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFormat {
    Jsonl,
    Matrix,
    Embeddings,
}

/// Scores produced outside the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSource {
    pub name: String,
    pub path: PathBuf,
    pub format: ScoreFormat,
}

pub const REFERENCE_SCORERS: [&str; 3] = ["oracle", "random", "bow"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Queries per RAW fold.
    pub fold_size: usize,
    pub max_folds: usize,
    pub scorers: Vec<String>,
    /// Seed of the random scorer; the global seed otherwise.
    pub random_seed: Option<u64>,
    pub scores: Vec<ScoreSource>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            fold_size: 1855,
            max_folds: forge_core::eval::MAX_FOLDS,
            scorers: REFERENCE_SCORERS.iter().map(|s| s.to_string()).collect(),
            random_seed: None,
            scores: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub parse: bool,
    pub parser_eval: bool,
    pub index: bool,
    pub split: bool,
    pub sample: bool,
    pub caption: bool,
    pub hardneg: bool,
    pub eval: bool,
    pub report: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            parse: true,
            parser_eval: true,
            index: true,
            split: true,
            sample: true,
            caption: true,
            hardneg: true,
            eval: true,
            report: true,
        }
    }
}

impl StageToggles {
    pub fn enabled(&self, stage: Stage) -> bool {
        match stage {
            Stage::Parse => self.parse,
            Stage::ParserEval => self.parser_eval,
            Stage::Index => self.index,
            Stage::Split => self.split,
            Stage::Sample => self.sample,
            Stage::Caption => self.caption,
            Stage::Hardneg => self.hardneg,
            Stage::Eval => self.eval,
            Stage::Report => self.report,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads; all cores otherwise.
    #[serde(default)]
    pub jobs: Option<usize>,
    pub paths: Paths,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub walk: WalkSection,
    #[serde(default)]
    pub caption: CaptionSection,
    #[serde(default)]
    pub hardneg: HardnegSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub stages: StageToggles,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config = PipelineConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.out);
        let p = &mut self.paths;
        for path in [&mut p.scene_graphs, &mut p.regions, &mut p.train_captions] {
            resolve(base, path);
        }
        for path in [
            &mut p.wordnet,
            &mut p.few_shot,
            &mut p.parser_gold,
            &mut p.lexicon,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, path);
        }
        for s in &mut self.eval.scores {
            resolve(base, &mut s.path);
        }
    }

    /// Whether `stage` runs in a full pipeline run.
    pub fn enabled(&self, stage: Stage) -> bool {
        let configured = match stage {
            Stage::ParserEval => self.paths.parser_gold.is_some(),
            _ => true,
        };
        configured && self.stages.enabled(stage)
    }

    /// Checks settings and the external inputs of `stages` before any work.
    pub fn validate(&self, stages: &[Stage]) -> Result<(), PipelineError> {
        let has = |s: Stage| stages.contains(&s);
        let need_file = |what: &str, p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                Err(PipelineError::Config(format!(
                    "{what} {} does not exist",
                    p.display()
                )))
            }
        };
        let need_dir = |what: &str, p: Option<&PathBuf>| match p {
            Some(p) if p.is_dir() => Ok(()),
            Some(p) => Err(PipelineError::Config(format!(
                "{what} {} is not a directory",
                p.display()
            ))),
            None => Err(PipelineError::Config(format!("{what} is not configured"))),
        };
        if has(Stage::Parse) {
            need_file("scene graphs", &self.paths.scene_graphs)?;
            need_file("regions", &self.paths.regions)?;
            need_file("training captions", &self.paths.train_captions)?;
            if let Some(dir) = &self.paths.lexicon {
                need_dir("lexicon", Some(dir))?;
            }
        }
        if has(Stage::ParserEval) {
            match &self.paths.parser_gold {
                Some(p) => need_file("parser gold", p)?,
                None => {
                    return Err(PipelineError::Config(
                        "parser_gold is not configured".into(),
                    ))
                }
            }
        }
        if has(Stage::Split) {
            self.filter.policy().validate()?;
        }
        if has(Stage::Sample) {
            need_file("scene graphs", &self.paths.scene_graphs)?;
            if self.walk.complexities.is_empty() {
                return Err(PipelineError::Config("walk.complexities is empty".into()));
            }
            let base = self.walk.config(self.seed);
            for &n in &self.walk.complexities {
                base.with_n(n).validate()?;
            }
            self.filter.policy().validate()?;
        }
        if has(Stage::Caption) {
            if self.caption.cutover < 2 {
                return Err(PipelineError::Config(
                    "caption.cutover must be at least 2".into(),
                ));
            }
            if self.caption.engine != EngineChoice::Template {
                match &self.paths.few_shot {
                    Some(p) => need_file("few-shot bank", p)?,
                    None => {
                        return Err(PipelineError::Config(
                            "few_shot is required by the client engines".into(),
                        ))
                    }
                }
            }
        }
        if has(Stage::Hardneg) {
            need_dir("wordnet", self.paths.wordnet.as_ref())?;
            need_file("scene graphs", &self.paths.scene_graphs)?;
            for (task, counts) in [
                ("systematicity", self.hardneg.systematicity),
                ("productivity", self.hardneg.productivity),
            ] {
                if counts.types().is_empty() {
                    return Err(PipelineError::Config(format!(
                        "hardneg.{task} requests no negatives"
                    )));
                }
            }
        }
        if has(Stage::Eval) {
            if self.eval.fold_size == 0 || self.eval.max_folds == 0 {
                return Err(PipelineError::Config(
                    "eval.fold_size and eval.max_folds must be positive".into(),
                ));
            }
            for name in &self.eval.scorers {
                if !REFERENCE_SCORERS.contains(&name.as_str()) {
                    return Err(PipelineError::Config(format!("unknown scorer {name:?}")));
                }
            }
            for s in &self.eval.scores {
                need_file(&format!("scores {:?}", s.name), &s.path)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 3
        [paths]
        scene_graphs = "g.json"
        regions = "r.json"
        train_captions = "t.tsv"
    "#;

    #[test]
    fn defaults_fill_missing_sections() {
        let c = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.walk.complexities, (4..=12).collect::<Vec<_>>());
        assert_eq!(c.hardneg.systematicity, HnCounts::systematicity());
        assert_eq!(c.filter.policy(), FilterPolicy::default());
        assert_eq!(c.caption.cutover, 5);
        assert!(!c.enabled(Stage::ParserEval));
        assert!(c.enabled(Stage::Hardneg));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\n[walk]\nlength = 4\n");
        assert!(matches!(
            PipelineConfig::from_toml(&text),
            Err(PipelineError::Config(_))
        ));
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let mut c = PipelineConfig::from_toml(MINIMAL).unwrap();
        c.resolve_paths(Path::new("/data/run"));
        assert_eq!(c.paths.regions, PathBuf::from("/data/run/r.json"));
        assert_eq!(c.out, PathBuf::from("/data/run/out"));
    }

    #[test]
    fn missing_wordnet_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = PipelineConfig::from_toml(MINIMAL).unwrap();
        fs::write(dir.path().join("g.json"), "[]").unwrap();
        c.resolve_paths(dir.path());
        let err = c.validate(&[Stage::Hardneg]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("wordnet"));
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
        assert!("nope".parse::<Stage>().is_err());
    }
}
