//! Runs configured stages in order with manifest-based resumption.

use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::{EngineChoice, PipelineConfig, Stage};
use crate::error::{PipelineError, StageFailure};
use crate::manifest::{Counts, Outcome, StageJob};
use crate::rows::Task;
use crate::stages::{
    self, CaptionInputs, EvalInputs, EvalOutputs, EvalParams, HardnegInputs, HardnegTask,
    ParseInputs, ParseOutputs,
};

/// Artifact names inside the output directory.
pub mod artifacts {
    pub const LEXICON: &str = "lexicon";
    pub const TRAIN_PARSED: &str = "train_parsed.jsonl";
    pub const TEST_PARSED: &str = "test_parsed.jsonl";
    pub const PARSER_REPORT: &str = "parser_report.json";
    pub const INDEX: &str = "index";
    pub const SPLITS: &str = "splits.jsonl";
    pub const SUBGRAPHS: &str = "subgraphs.jsonl";
    pub const CAPTIONS: &str = "captions.jsonl";
    pub const HARDNEG: &str = "hardneg.jsonl";
    pub const METRICS: &str = "metrics.jsonl";
    pub const ITEMS: &str = "items.jsonl";
    pub const TEXTS: &str = "texts.jsonl";
    pub const REPORT_CSV: &str = "report.csv";
    pub const REPORT_MD: &str = "report.md";
}

use artifacts as a;

/// What happened to each stage of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub stages: Vec<(Stage, Outcome)>,
}

impl RunSummary {
    pub fn outcome(&self, stage: Stage) -> Option<&Outcome> {
        self.stages
            .iter()
            .find(|(s, _)| *s == stage)
            .map(|(_, o)| o)
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (stage, outcome) in &self.stages {
            let state = if outcome.skipped() {
                "skipped (up-to-date)"
            } else {
                "ran"
            };
            let counts: Vec<String> = outcome
                .counts()
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            writeln!(f, "{stage:<12} {state:<21} {}", counts.join(" "))?;
        }
        Ok(())
    }
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub force: bool,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Pipeline {
            config,
            force: false,
        }
    }

    pub fn out(&self) -> &Path {
        &self.config.out
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    /// The enabled stages of `selection`, or of the whole pipeline.
    pub fn plan(&self, selection: Option<&[Stage]>) -> Vec<Stage> {
        Stage::ALL
            .into_iter()
            .filter(|s| match selection {
                Some(sel) => sel.contains(s),
                None => self.config.enabled(*s),
            })
            .collect()
    }

    /// Validates the configuration, then runs the planned stages in a
    /// thread pool sized by `jobs`.
    pub fn run(&self, selection: Option<&[Stage]>) -> Result<RunSummary, StageFailure> {
        let plan = self.plan(selection);
        let fail = |stage: &str, source| StageFailure {
            stage: stage.to_string(),
            source,
        };
        self.config.validate(&plan).map_err(|e| fail("config", e))?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.config.jobs {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| fail("config", PipelineError::Config(e.to_string())))?;
        pool.install(|| {
            let mut summary = RunSummary::default();
            for stage in plan.iter().copied() {
                log::info!("{stage}: starting");
                let outcome = self
                    .run_stage(stage, &plan)
                    .map_err(|e| fail(stage.as_str(), e))?;
                summary.stages.push((stage, outcome));
            }
            Ok(summary)
        })
    }

    /// An input produced by an earlier stage; optional inputs are used when
    /// the producer is planned or the artifact exists.
    fn upstream(&self, name: &str, producer: Stage, plan: &[Stage]) -> Option<PathBuf> {
        let p = self.artifact(name);
        (plan.contains(&producer) || p.exists()).then_some(p)
    }

    fn job(&self, stage: Stage, params: serde_json::Value) -> StageJob {
        StageJob::new(stage.as_str(), &self.config.out, self.config.seed, params)
    }

    fn base_lexicon(&self) -> Option<&Path> {
        self.config.paths.lexicon.as_deref()
    }

    pub fn run_stage(&self, stage: Stage, plan: &[Stage]) -> Result<Outcome, PipelineError> {
        let c = &self.config;
        let p = &c.paths;
        match stage {
            Stage::Parse => {
                let mut job = self
                    .job(stage, json!({}))
                    .input("scene_graphs", &p.scene_graphs)
                    .input("regions", &p.regions)
                    .input("train_captions", &p.train_captions);
                if let Some(l) = self.base_lexicon() {
                    job = job.input("lexicon", l);
                }
                let job = job
                    .output(a::LEXICON)
                    .output(a::TRAIN_PARSED)
                    .output(a::TEST_PARSED);
                job.run(self.force, |s| {
                    stages::parse(
                        &ParseInputs {
                            scene_graphs: &p.scene_graphs,
                            regions: &p.regions,
                            train_captions: &p.train_captions,
                            lexicon: self.base_lexicon(),
                        },
                        &ParseOutputs {
                            lexicon: s.path(a::LEXICON),
                            train: s.path(a::TRAIN_PARSED),
                            test: s.path(a::TEST_PARSED),
                        },
                    )
                })
            }
            Stage::ParserEval => {
                let gold = p
                    .parser_gold
                    .as_ref()
                    .ok_or_else(|| PipelineError::Config("parser_gold is not configured".into()))?;
                let lexicon = self.artifact(a::LEXICON);
                self.job(stage, json!({}))
                    .input("parser_gold", gold)
                    .input("lexicon", &lexicon)
                    .output(a::PARSER_REPORT)
                    .run(self.force, |s| {
                        stages::parser_eval(gold, Some(&lexicon), &s.path(a::PARSER_REPORT))
                    })
            }
            Stage::Index => {
                let train = self.artifact(a::TRAIN_PARSED);
                self.job(stage, json!({}))
                    .input("train_parsed", &train)
                    .output(a::INDEX)
                    .run(self.force, |s| stages::index(&train, &s.path(a::INDEX)))
            }
            Stage::Split => {
                let policy = c.filter.policy();
                let test = self.artifact(a::TEST_PARSED);
                let index = self.artifact(a::INDEX);
                self.job(stage, json!({ "filter": policy }))
                    .input("test_parsed", &test)
                    .input("index", &index)
                    .output(a::SPLITS)
                    .run(self.force, |s| {
                        stages::split(&test, &index, &policy, &s.path(a::SPLITS))
                    })
            }
            Stage::Sample => {
                let policy = c.filter.policy();
                let walk = c.walk.config(c.seed);
                self.job(stage, json!({ "walk": c.walk, "filter": policy }))
                    .input("scene_graphs", &p.scene_graphs)
                    .output(a::SUBGRAPHS)
                    .run(self.force, |s| {
                        stages::sample(
                            &p.scene_graphs,
                            &c.walk.complexities,
                            &walk,
                            &policy,
                            &s.path(a::SUBGRAPHS),
                        )
                    })
            }
            Stage::Caption => {
                let subgraphs = self.artifact(a::SUBGRAPHS);
                let lexicon = self.artifact(a::LEXICON);
                let client = c.caption.engine != EngineChoice::Template;
                let mut job = self
                    .job(stage, json!({ "caption": c.caption }))
                    .input("subgraphs", &subgraphs);
                if client {
                    if let Some(bank) = &p.few_shot {
                        job = job.input("few_shot", bank);
                    }
                    job = job.input("lexicon", &lexicon);
                }
                job.output(a::CAPTIONS).run(self.force, |s| {
                    stages::caption(
                        &CaptionInputs {
                            subgraphs: &subgraphs,
                            engine: c.caption.engine,
                            few_shot: p.few_shot.as_deref(),
                            lexicon: Some(&lexicon),
                        },
                        &c.caption.config(),
                        &s.path(a::CAPTIONS),
                    )
                })
            }
            Stage::Hardneg => {
                let wordnet = p
                    .wordnet
                    .as_ref()
                    .ok_or_else(|| PipelineError::Config("wordnet is not configured".into()))?;
                let lexicon = self.artifact(a::LEXICON);
                let mut job = self
                    .job(stage, json!({ "hardneg": c.hardneg }))
                    .input("scene_graphs", &p.scene_graphs)
                    .input("wordnet", wordnet)
                    .input("lexicon", &lexicon);
                let mut tasks = Vec::new();
                let splits = self.upstream(a::SPLITS, Stage::Split, plan);
                let captions = self.upstream(a::CAPTIONS, Stage::Caption, plan);
                if let Some(path) = &splits {
                    job = job.input("splits", path);
                    tasks.push(HardnegTask {
                        task: Task::Systematicity,
                        queries: path,
                        counts: c.hardneg.systematicity,
                    });
                }
                if let Some(path) = &captions {
                    job = job.input("captions", path);
                    tasks.push(HardnegTask {
                        task: Task::Productivity,
                        queries: path,
                        counts: c.hardneg.productivity,
                    });
                }
                if tasks.is_empty() {
                    return Err(PipelineError::Input(
                        "hardneg needs split or caption rows".into(),
                    ));
                }
                job.output(a::HARDNEG).run(self.force, |s| {
                    stages::hardneg(
                        &tasks,
                        &HardnegInputs {
                            scene_graphs: &p.scene_graphs,
                            wordnet,
                            lexicon: Some(&lexicon),
                        },
                        c.seed,
                        &s.path(a::HARDNEG),
                    )
                })
            }
            Stage::Eval => {
                let params = EvalParams {
                    fold_size: c.eval.fold_size,
                    max_folds: c.eval.max_folds,
                    scorers: c.eval.scorers.clone(),
                    random_seed: c.eval.random_seed.unwrap_or(c.seed),
                    seed: c.seed,
                };
                let hardneg = self.upstream(a::HARDNEG, Stage::Hardneg, plan);
                let splits = self.upstream(a::SPLITS, Stage::Split, plan);
                let captions = self.upstream(a::CAPTIONS, Stage::Caption, plan);
                let mut job = self.job(stage, json!({ "eval": params, "scores": c.eval.scores }));
                for (name, path) in [
                    ("hardneg", &hardneg),
                    ("splits", &splits),
                    ("captions", &captions),
                ] {
                    if let Some(path) = path {
                        job = job.input(name, path);
                    }
                }
                for s in &c.eval.scores {
                    job = job.input(&format!("scores:{}", s.name), &s.path);
                }
                job.output(a::METRICS)
                    .output(a::ITEMS)
                    .output(a::TEXTS)
                    .run(self.force, |s| {
                        stages::eval(
                            &EvalInputs {
                                hardneg: hardneg.as_deref(),
                                splits: splits.as_deref(),
                                captions: captions.as_deref(),
                                scores: &c.eval.scores,
                            },
                            &params,
                            &EvalOutputs {
                                metrics: s.path(a::METRICS),
                                items: s.path(a::ITEMS),
                                texts: s.path(a::TEXTS),
                            },
                        )
                    })
            }
            Stage::Report => {
                let metrics = self.artifact(a::METRICS);
                self.job(stage, json!({}))
                    .input("metrics", &metrics)
                    .output(a::REPORT_CSV)
                    .output(a::REPORT_MD)
                    .run(self.force, |s| {
                        stages::report(&metrics, &s.path(a::REPORT_CSV), &s.path(a::REPORT_MD))
                    })
            }
        }
    }
}

/// Split sizes recorded by the split stage, if it ran.
pub fn split_counts(summary: &RunSummary) -> Option<Counts> {
    summary.outcome(Stage::Split).map(|o| {
        o.counts()
            .iter()
            .filter(|(k, _)| ["SC", "UC", "UA"].contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    })
}
