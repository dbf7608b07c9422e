//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use forge_core::caption::CaptionConfig;
use forge_core::eval::MAX_FOLDS;
use forge_core::hardneg::{HnCounts, HnType};
use forge_core::{FilterPolicy, WalkConfig};

use crate::config::{EngineChoice, PipelineConfig, ScoreFormat, ScoreSource, Stage};
use crate::error::{PipelineError, StageFailure};
use crate::manifest::{Outcome, StageJob};
use crate::pipeline::{artifacts as a, split_counts, Pipeline};
use crate::rows::Task;
use crate::stages::{
    self, CaptionInputs, EvalInputs, EvalOutputs, EvalParams, HardnegInputs, HardnegTask,
    ParseInputs, ParseOutputs,
};

#[derive(Debug, Parser)]
#[command(
    name = "forge",
    version,
    about = "Build and score compositional image-text retrieval benchmarks"
)]
pub struct Cli {
    /// Global seed; overrides the configuration file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Rerun stages even when their manifests are current.
    #[arg(long, global = true)]
    pub force: bool,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline described by a TOML configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the configuration file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of stages.
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<String>>,
    },
    /// Parse training captions and region descriptions into scene graphs.
    Parse {
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long)]
        regions: PathBuf,
        #[arg(long)]
        train: PathBuf,
        /// Base word lists; the bundled ones otherwise.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the parser on captions with gold graphs.
    ParserEval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the seen-atom and seen-compound index.
    Index {
        /// Parsed training captions (JSONL).
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter test captions and label them SC, UC or UA.
    Split {
        /// Parsed test captions (JSONL).
        #[arg(long)]
        test: PathBuf,
        /// Index directory.
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample fixed-complexity subgraphs by random walk.
    Sample {
        #[arg(long)]
        graphs: PathBuf,
        /// Complexities: `4..12` (inclusive) or `4,6,8`.
        #[arg(long, default_value = "4..12")]
        n: String,
        #[arg(long, default_value_t = 4)]
        per_image: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Caption sampled subgraphs.
    Caption {
        #[arg(long)]
        subgraphs: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineArg::Template)]
        engine: EngineArg,
        #[arg(long)]
        few_shot: Option<PathBuf>,
        /// Lexicon directory for the mock client.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        cutover: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate verified hard negatives.
    Hardneg {
        /// Negative types to generate; every type the preset requests by default.
        #[arg(long = "type", value_enum, value_delimiter = ',')]
        types: Vec<HnTypeArg>,
        /// Split rows or caption rows (JSONL).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long)]
        wordnet: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Task whose per-type counts apply.
        #[arg(long, value_enum)]
        counts: TaskArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build retrieval sets and compute Recall@K.
    Eval(EvalArgs),
    /// Render metrics as CSV and Markdown.
    Report {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub hardneg: Option<PathBuf>,
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[arg(long)]
    pub captions: Option<PathBuf>,
    /// External scores as `name=path:format`, format one of jsonl,
    /// matrix, embeddings.
    #[arg(long = "scores")]
    pub scores: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "oracle,random,bow")]
    pub scorers: Vec<String>,
    #[arg(long, default_value_t = 1855)]
    pub fold_size: usize,
    #[arg(long, default_value_t = MAX_FOLDS)]
    pub max_folds: usize,
    /// Seed of the random scorer; the global seed otherwise.
    #[arg(long)]
    pub random_seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EngineArg {
    Template,
    Mock,
    Http,
}

impl From<EngineArg> for EngineChoice {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Template => EngineChoice::Template,
            EngineArg::Mock => EngineChoice::Mock,
            EngineArg::Http => EngineChoice::Http,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Systematicity,
    Productivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HnTypeArg {
    Atom,
    Comp,
    Swap,
    Neg,
}

impl From<HnTypeArg> for HnType {
    fn from(t: HnTypeArg) -> Self {
        match t {
            HnTypeArg::Atom => HnType::Atom,
            HnTypeArg::Comp => HnType::Comp,
            HnTypeArg::Swap => HnType::Swap,
            HnTypeArg::Neg => HnType::Neg,
        }
    }
}

/// The preset's counts restricted to `types`, or all of them when empty.
pub fn select_counts(preset: HnCounts, types: &[HnType]) -> HnCounts {
    let keep = |t: HnType| {
        if types.is_empty() || types.contains(&t) {
            preset.get(t)
        } else {
            0
        }
    };
    HnCounts {
        atom: keep(HnType::Atom),
        comp: keep(HnType::Comp),
        swap: keep(HnType::Swap),
        neg: keep(HnType::Neg),
    }
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Systematicity => Task::Systematicity,
            TaskArg::Productivity => Task::Productivity,
        }
    }
}

/// Parses `4..12` (inclusive) or a comma-separated list.
pub fn parse_complexities(s: &str) -> Result<Vec<usize>, PipelineError> {
    let bad = || PipelineError::Config(format!("invalid complexities {s:?}"));
    let ns: Vec<usize> = match s.split_once("..") {
        Some((lo, hi)) => {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi
                .trim()
                .trim_start_matches('=')
                .parse()
                .map_err(|_| bad())?;
            (lo..=hi).collect()
        }
        None => s
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?,
    };
    if ns.is_empty() {
        return Err(bad());
    }
    Ok(ns)
}

/// Parses `name=path:format`.
pub fn parse_score_source(s: &str) -> Result<ScoreSource, PipelineError> {
    let bad = || PipelineError::Config(format!("invalid scores {s:?}, expected name=path:format"));
    let (name, rest) = s.split_once('=').ok_or_else(bad)?;
    let (path, format) = rest.rsplit_once(':').ok_or_else(bad)?;
    let format = match format {
        "jsonl" => ScoreFormat::Jsonl,
        "matrix" => ScoreFormat::Matrix,
        "embeddings" => ScoreFormat::Embeddings,
        _ => return Err(bad()),
    };
    Ok(ScoreSource {
        name: name.to_string(),
        path: PathBuf::from(path),
        format,
    })
}

fn stage_failure(stage: &str, source: PipelineError) -> StageFailure {
    StageFailure {
        stage: stage.to_string(),
        source,
    }
}

fn print_outcome(stage: &str, outcome: &Outcome) {
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
    println!("{stage:<12} {state:<21} {}", counts.join(" "));
}

fn require_file(what: &str, p: &Path) -> Result<(), PipelineError> {
    if p.exists() {
        Ok(())
    } else {
        Err(PipelineError::Input(format!(
            "{what} {} does not exist",
            p.display()
        )))
    }
}

fn run_single(cli: &Cli) -> Result<(), StageFailure> {
    let seed = cli.seed.unwrap_or(0);
    let job = |stage: &str, out: &Path, params| StageJob::new(stage, out, seed, params);
    let (stage, outcome) = match &cli.command {
        Command::Run { .. } => unreachable!("handled by run_pipeline"),
        Command::Parse {
            graphs,
            regions,
            train,
            lexicon,
            out,
        } => {
            let mut j = job("parse", out, json!({}))
                .input("scene_graphs", graphs)
                .input("regions", regions)
                .input("train_captions", train);
            if let Some(l) = lexicon {
                j = j.input("lexicon", l);
            }
            let j = j
                .output(a::LEXICON)
                .output(a::TRAIN_PARSED)
                .output(a::TEST_PARSED);
            let r = j.run(cli.force, |s| {
                stages::parse(
                    &ParseInputs {
                        scene_graphs: graphs,
                        regions,
                        train_captions: train,
                        lexicon: lexicon.as_deref(),
                    },
                    &ParseOutputs {
                        lexicon: s.path(a::LEXICON),
                        train: s.path(a::TRAIN_PARSED),
                        test: s.path(a::TEST_PARSED),
                    },
                )
            });
            ("parse", r)
        }
        Command::ParserEval { gold, lexicon, out } => {
            let mut j = job("parser-eval", out, json!({})).input("parser_gold", gold);
            if let Some(l) = lexicon {
                j = j.input("lexicon", l);
            }
            let r = j.output(a::PARSER_REPORT).run(cli.force, |s| {
                stages::parser_eval(gold, lexicon.as_deref(), &s.path(a::PARSER_REPORT))
            });
            ("parser-eval", r)
        }
        Command::Index { train, out } => {
            let r = job("index", out, json!({}))
                .input("train_parsed", train)
                .output(a::INDEX)
                .run(cli.force, |s| stages::index(train, &s.path(a::INDEX)));
            ("index", r)
        }
        Command::Split { test, index, out } => {
            let policy = FilterPolicy::default();
            let r = job("split", out, json!({ "filter": policy }))
                .input("test_parsed", test)
                .input("index", index)
                .output(a::SPLITS)
                .run(cli.force, |s| {
                    stages::split(test, index, &policy, &s.path(a::SPLITS))
                });
            ("split", r)
        }
        Command::Sample {
            graphs,
            n,
            per_image,
            out,
        } => {
            let r = parse_complexities(n).and_then(|ns| {
                let walk = WalkConfig {
                    n: ns[0],
                    seed,
                    samples_per_image_per_n: *per_image,
                    ..WalkConfig::default()
                };
                let policy = FilterPolicy::default();
                job(
                    "sample",
                    out,
                    json!({ "walk": walk, "complexities": ns, "filter": policy }),
                )
                .input("scene_graphs", graphs)
                .output(a::SUBGRAPHS)
                .run(cli.force, |s| {
                    stages::sample(graphs, &ns, &walk, &policy, &s.path(a::SUBGRAPHS))
                })
            });
            ("sample", r)
        }
        Command::Caption {
            subgraphs,
            engine,
            few_shot,
            lexicon,
            cutover,
            out,
        } => {
            let config = CaptionConfig {
                cutover: *cutover,
                ..CaptionConfig::default()
            };
            let engine: EngineChoice = (*engine).into();
            let mut j = job(
                "caption",
                out,
                json!({ "caption": config, "engine": engine }),
            )
            .input("subgraphs", subgraphs);
            for (name, p) in [("few_shot", few_shot), ("lexicon", lexicon)] {
                if let Some(p) = p {
                    j = j.input(name, p);
                }
            }
            let r = j.output(a::CAPTIONS).run(cli.force, |s| {
                stages::caption(
                    &CaptionInputs {
                        subgraphs,
                        engine,
                        few_shot: few_shot.as_deref(),
                        lexicon: lexicon.as_deref(),
                    },
                    &config,
                    &s.path(a::CAPTIONS),
                )
            });
            ("caption", r)
        }
        Command::Hardneg {
            types,
            input,
            graphs,
            wordnet,
            lexicon,
            counts,
            out,
        } => {
            let task: Task = (*counts).into();
            let preset = match task {
                Task::Systematicity => HnCounts::systematicity(),
                Task::Productivity => HnCounts::productivity(),
            };
            let types: Vec<HnType> = types.iter().map(|&t| t.into()).collect();
            let counts = select_counts(preset, &types);
            let r = require_file("wordnet directory", wordnet).and_then(|_| {
                let mut j = job("hardneg", out, json!({ "task": task, "counts": counts }))
                    .input("queries", input)
                    .input("scene_graphs", graphs)
                    .input("wordnet", wordnet);
                if let Some(l) = lexicon {
                    j = j.input("lexicon", l);
                }
                j.output(a::HARDNEG).run(cli.force, |s| {
                    stages::hardneg(
                        &[HardnegTask {
                            task,
                            queries: input,
                            counts,
                        }],
                        &HardnegInputs {
                            scene_graphs: graphs,
                            wordnet,
                            lexicon: lexicon.as_deref(),
                        },
                        seed,
                        &s.path(a::HARDNEG),
                    )
                })
            });
            ("hardneg", r)
        }
        Command::Eval(args) => ("eval", run_eval(args, seed, cli.force)),
        Command::Report { metrics, out } => {
            let r = job("report", out, json!({}))
                .input("metrics", metrics)
                .output(a::REPORT_CSV)
                .output(a::REPORT_MD)
                .run(cli.force, |s| {
                    stages::report(metrics, &s.path(a::REPORT_CSV), &s.path(a::REPORT_MD))
                });
            ("report", r)
        }
    };
    let outcome = outcome.map_err(|e| stage_failure(stage, e))?;
    print_outcome(stage, &outcome);
    Ok(())
}

fn run_eval(args: &EvalArgs, seed: u64, force: bool) -> Result<Outcome, PipelineError> {
    let scores = args
        .scores
        .iter()
        .map(|s| parse_score_source(s))
        .collect::<Result<Vec<_>, _>>()?;
    if args.hardneg.is_none() && args.splits.is_none() && args.captions.is_none() {
        return Err(PipelineError::Config(
            "eval needs --hardneg, --splits or --captions".into(),
        ));
    }
    let params = EvalParams {
        fold_size: args.fold_size,
        max_folds: args.max_folds,
        scorers: args.scorers.clone(),
        random_seed: args.random_seed.unwrap_or(seed),
        seed,
    };
    let mut job = StageJob::new(
        "eval",
        &args.out,
        seed,
        json!({ "eval": params, "scores": scores }),
    );
    for (name, path) in [
        ("hardneg", &args.hardneg),
        ("splits", &args.splits),
        ("captions", &args.captions),
    ] {
        if let Some(p) = path {
            job = job.input(name, p);
        }
    }
    for s in &scores {
        job = job.input(&format!("scores:{}", s.name), &s.path);
    }
    job.output(a::METRICS)
        .output(a::ITEMS)
        .output(a::TEXTS)
        .run(force, |s| {
            stages::eval(
                &EvalInputs {
                    hardneg: args.hardneg.as_deref(),
                    splits: args.splits.as_deref(),
                    captions: args.captions.as_deref(),
                    scores: &scores,
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

fn run_pipeline(
    cli: &Cli,
    config: &Path,
    out: Option<&Path>,
    selection: Option<&[String]>,
) -> Result<(), StageFailure> {
    let mut config = PipelineConfig::load(config).map_err(|e| stage_failure("config", e))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = Some(jobs);
    }
    if let Some(out) = out {
        config.out = out.to_path_buf();
    }
    let selection: Option<Vec<Stage>> = selection
        .map(|names| {
            names
                .iter()
                .map(|n| n.trim().parse())
                .collect::<Result<_, _>>()
        })
        .transpose()
        .map_err(|e| stage_failure("config", e))?;
    let mut pipeline = Pipeline::new(config);
    pipeline.force = cli.force;
    let summary = pipeline.run(selection.as_deref())?;
    print!("{summary}");
    if let Some(splits) = split_counts(&summary) {
        let parts: Vec<String> = splits.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("splits: {}", parts.join(" "));
    }
    println!("outputs in {}", pipeline.out().display());
    Ok(())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Runs the command line; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Run {
            config,
            out,
            stages,
        } => run_pipeline(&cli, config, out.as_deref(), stages.as_deref()),
        _ => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.jobs.unwrap_or(0))
                .build();
            match pool {
                Ok(pool) => pool.install(|| run_single(&cli)),
                Err(e) => Err(stage_failure(
                    "config",
                    PipelineError::Config(e.to_string()),
                )),
            }
        }
    };
    match result {
        Ok(()) => 0,
        Err(failure) => {
            let report = failure.report();
            eprintln!(
                "{}",
                serde_json::to_string(&report).unwrap_or_else(|_| failure.to_string())
            );
            failure.exit_code()
        }
    }
}
