//! Stage bodies. Each reads its inputs from paths and writes its outputs
//! to the paths it is given; bookkeeping lives in [`crate::manifest`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use forge_core::caption::{
    generate_captions, CaptionConfig, CaptionOutcome, Engine, FewShotBank, GenClient, HttpClient,
    MockClient,
};
use forge_core::eval::{
    assemble_hn_sets, assemble_raw_folds, evaluate, kfold_summary, BowScorer, Direction,
    Embeddings, EvalError, OracleScorer, QueryStrata, RandomScorer, RawRecord, RetrievalItem,
    Scorer, Stratum,
};
use forge_core::hardneg::{generate_all, HardNegGenerator, HnConfig, HnCounts, HnQuery, HnType};
use forge_core::index::{
    build_seen_index, classify_split, filter_records, FilterRecord, SeenIndex, SplitLabel,
};
use forge_core::io::{read_captions, write_atomic, write_jsonl};
use forge_core::lexical::LexicalDb;
use forge_core::parser::{evaluate_parser, parse_caption, Lexicon};
use forge_core::sampler::{crop_and_filter, sample_all};
use forge_core::{CaptionRecord, FilterPolicy, MetricsReport, SceneGraph, ScoreTable, WalkConfig};

use crate::config::{EngineChoice, ScoreFormat, ScoreSource};
use crate::error::PipelineError;
use crate::manifest::Counts;
use crate::rows::{
    graphs_by_id, load_regions, load_scene_graphs, read_rows, CaptionRow, HnOutputRow, ItemRow,
    MetricsRow, QueryRow, SetKind, SplitRow, SubgraphRow, Task, TestRecord, TextRow,
};

/// Captions per shard when building the seen index.
pub const INDEX_CHUNK: usize = 4096;

fn count(counts: &mut Counts, key: impl Into<String>, n: usize) {
    *counts.entry(key.into()).or_default() += n as u64;
}

fn load_lexicon(dir: Option<&Path>) -> Result<Lexicon, PipelineError> {
    Ok(match dir {
        Some(d) => Lexicon::from_dir(d)?,
        None => Lexicon::bundled(),
    })
}

pub struct ParseInputs<'a> {
    pub scene_graphs: &'a Path,
    pub regions: &'a Path,
    pub train_captions: &'a Path,
    /// Base word lists; the bundled ones otherwise.
    pub lexicon: Option<&'a Path>,
}

pub struct ParseOutputs {
    pub lexicon: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
}

/// Extends the lexicon with the scene-graph vocabulary, then parses the
/// training captions and the region descriptions.
pub fn parse(inputs: &ParseInputs, out: &ParseOutputs) -> Result<Counts, PipelineError> {
    let mut counts = Counts::new();
    let mut lexicon = load_lexicon(inputs.lexicon)?;
    let (graphs, graph_report) = load_scene_graphs(inputs.scene_graphs)?;
    count(&mut counts, "graphs", graphs.len());
    count(&mut counts, "graphs_skipped", graph_report.skipped);
    for g in &graphs {
        lexicon.learn(g);
    }
    lexicon.save(&out.lexicon)?;

    let (mut train, train_report) = read_captions(inputs.train_captions)?;
    for e in &train_report.errors {
        log::warn!("{e}");
    }
    count(&mut counts, "train_skipped", train_report.skipped);
    let parsed: Vec<Option<SceneGraph>> = train
        .par_iter()
        .map(|r| parse_caption(&r.text, &lexicon).ok())
        .collect();
    for (rec, graph) in train.iter_mut().zip(parsed) {
        rec.graph = graph;
    }
    let train_ok = train.iter().filter(|r| r.graph.is_some()).count();
    count(&mut counts, "train_parsed", train_ok);
    count(&mut counts, "train_unparsed", train.len() - train_ok);
    write_jsonl(&out.train, &train)?;

    let sizes: BTreeMap<&str, (u32, u32)> = graphs
        .iter()
        .filter_map(|g| g.image_size().map(|s| (g.image_id(), s)))
        .collect();
    let (regions, region_report) = load_regions(inputs.regions)?;
    count(&mut counts, "test_skipped", region_report.skipped);
    let test: Vec<TestRecord> = regions
        .into_par_iter()
        .map(|r| TestRecord {
            graph: parse_caption(&r.text, &lexicon).ok(),
            image_size: sizes.get(r.image_id.as_str()).copied(),
            caption_id: r.caption_id,
            image_id: r.image_id,
            text: r.text,
            region: r.region,
        })
        .collect();
    let test_ok = test.iter().filter(|r| r.graph.is_some()).count();
    count(&mut counts, "test_parsed", test_ok);
    count(&mut counts, "test_unparsed", test.len() - test_ok);
    write_jsonl(&out.test, &test)?;
    Ok(counts)
}

/// Scores the parser against captions carrying gold graphs.
pub fn parser_eval(
    gold: &Path,
    lexicon: Option<&Path>,
    out: &Path,
) -> Result<Counts, PipelineError> {
    let lexicon = load_lexicon(lexicon)?;
    let records: Vec<CaptionRecord> = read_rows(gold)?;
    let mut golds = Vec::with_capacity(records.len());
    for r in &records {
        let g = r.graph.clone().ok_or_else(|| {
            PipelineError::Input(format!("gold caption {} has no graph", r.caption_id))
        })?;
        golds.push(g);
    }
    let mut failed = 0;
    let preds: Vec<SceneGraph> = records
        .iter()
        .map(|r| {
            parse_caption(&r.text, &lexicon).unwrap_or_else(|_| {
                failed += 1;
                SceneGraph::empty("caption")
            })
        })
        .collect();
    let report = evaluate_parser(&preds, &golds)?;
    write_atomic(out, |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        std::io::Write::write_all(w, b"\n")
    })?;
    let mut counts = Counts::new();
    count(&mut counts, "captions", records.len());
    count(&mut counts, "parse_failures", failed);
    Ok(counts)
}

/// Builds the seen-atom and seen-compound index from parsed training
/// captions, one shard per chunk in parallel.
pub fn index(train_parsed: &Path, out_dir: &Path) -> Result<Counts, PipelineError> {
    let records: Vec<CaptionRecord> = read_rows(train_parsed)?;
    let index = index_records(&records);
    index.save(out_dir)?;
    let mut counts = Counts::new();
    count(&mut counts, "records", index.record_count as usize);
    count(&mut counts, "skipped", index.skipped as usize);
    count(&mut counts, "atoms", index.atoms.len());
    count(&mut counts, "compounds", index.compounds.len());
    Ok(counts)
}

/// Index over records with a parsed graph; the others count as skipped.
pub fn index_records(records: &[CaptionRecord]) -> SeenIndex {
    records
        .par_chunks(INDEX_CHUNK)
        .map(|chunk| {
            build_seen_index(
                "train",
                chunk.iter().map(|r| {
                    r.graph
                        .clone()
                        .ok_or_else(|| format!("caption {} did not parse", r.caption_id))
                }),
            )
        })
        .reduce(
            || SeenIndex::new("train"),
            |mut a, b| {
                a.merge(b);
                a
            },
        )
}

/// Filters parsed test captions and labels each SC, UC or UA.
pub fn split(
    test_parsed: &Path,
    index_dir: &Path,
    policy: &FilterPolicy,
    out: &Path,
) -> Result<Counts, PipelineError> {
    policy.validate()?;
    let index = SeenIndex::load(index_dir)?;
    let rows: Vec<TestRecord> = read_rows(test_parsed)?;
    let mut counts = Counts::new();
    let mut records = Vec::with_capacity(rows.len());
    let mut image_of = BTreeMap::new();
    for r in rows {
        let Some(graph) = r.graph else {
            count(&mut counts, "unparsed", 1);
            continue;
        };
        let caption = CaptionRecord::new(r.caption_id.clone(), r.text)
            .map_err(|e| PipelineError::Input(format!("caption {}: {e}", r.caption_id)))?;
        image_of.insert(r.caption_id, r.image_id);
        records.push(FilterRecord {
            caption,
            graph,
            region: r.region,
            image_size: r.image_size,
        });
    }
    let (kept, report) = filter_records(records, policy);
    count(&mut counts, "input", report.input);
    count(&mut counts, "kept", report.kept);
    count(&mut counts, "dropped_region", report.dropped_region);
    count(&mut counts, "dropped_graph", report.dropped_graph);
    count(&mut counts, "dropped_duplicate", report.dropped_duplicate);
    count(&mut counts, "record_errors", report.record_errors);
    for l in SplitLabel::ALL {
        count(&mut counts, l.as_str(), 0);
    }
    let out_rows: Vec<SplitRow> = kept
        .into_iter()
        .map(|rec| {
            let split = classify_split(&rec.graph, &index);
            count(&mut counts, split.as_str(), 1);
            SplitRow {
                image_id: image_of.remove(&rec.caption.caption_id).unwrap_or_default(),
                caption_id: rec.caption.caption_id,
                split,
                text: rec.caption.text,
                graph: rec.graph,
                region: rec.region,
            }
        })
        .collect();
    write_jsonl(out, &out_rows)?;
    Ok(counts)
}

/// Samples subgraphs of every complexity and keeps crops passing the
/// region filter and the overlap limit.
pub fn sample(
    scene_graphs: &Path,
    complexities: &[usize],
    walk: &WalkConfig,
    policy: &FilterPolicy,
    out: &Path,
) -> Result<Counts, PipelineError> {
    let (graphs, _) = load_scene_graphs(scene_graphs)?;
    let (samples, report) = sample_all(&graphs, complexities, walk)?;
    let kept = crop_and_filter(samples, policy, walk);
    let mut counts = Counts::new();
    count(&mut counts, "sampled", report.sampled);
    count(&mut counts, "too_small", report.too_small);
    count(&mut counts, "walk_failed", report.walk_failed);
    count(&mut counts, "kept", kept.len());
    for &n in complexities {
        count(
            &mut counts,
            format!("n={n}"),
            kept.iter().filter(|s| s.complexity == n).count(),
        );
    }
    let rows: Vec<SubgraphRow> = kept
        .into_iter()
        .map(|s| SubgraphRow {
            id: s.id(),
            sample: s,
        })
        .collect();
    write_jsonl(out, &rows)?;
    Ok(counts)
}

pub struct CaptionInputs<'a> {
    pub subgraphs: &'a Path,
    pub engine: EngineChoice,
    pub few_shot: Option<&'a Path>,
    /// Lexicon the mock client reads prompts with.
    pub lexicon: Option<&'a Path>,
}

/// Renders each sampled subgraph as a caption.
pub fn caption(
    inputs: &CaptionInputs,
    config: &CaptionConfig,
    out: &Path,
) -> Result<Counts, PipelineError> {
    let rows: Vec<SubgraphRow> = read_rows(inputs.subgraphs)?;
    let graphs: Vec<SceneGraph> = rows.iter().map(|r| r.sample.subgraph.clone()).collect();
    let client: Option<Box<dyn GenClient>> = match inputs.engine {
        EngineChoice::Template => None,
        EngineChoice::Mock => Some(Box::new(MockClient::new(Arc::new(load_lexicon(
            inputs.lexicon,
        )?)))),
        EngineChoice::Http => Some(Box::new(HttpClient::from_env()?)),
    };
    let bank = match (&client, inputs.few_shot) {
        (None, _) => None,
        (Some(_), Some(p)) => Some(FewShotBank::load(p)?),
        (Some(_), None) => {
            return Err(PipelineError::Config(
                "the client engines need a few-shot bank".into(),
            ))
        }
    };
    let pair = client.as_deref().zip(bank.as_ref());
    let outcomes = generate_captions(&graphs, config, pair)?;
    let mut counts = Counts::new();
    for key in [
        "accepted",
        "rejected",
        "failed",
        "engine_template",
        "engine_client",
    ] {
        count(&mut counts, key, 0);
    }
    let out_rows: Vec<CaptionRow> = rows
        .into_iter()
        .zip(outcomes)
        .map(|(r, outcome)| {
            match &outcome {
                CaptionOutcome::Accepted { engine, .. } => {
                    count(&mut counts, "accepted", 1);
                    let key = match engine {
                        Engine::Template => "engine_template",
                        Engine::Client => "engine_client",
                    };
                    count(&mut counts, key, 1);
                }
                CaptionOutcome::Rejected { .. } => count(&mut counts, "rejected", 1),
                CaptionOutcome::Failed { .. } => count(&mut counts, "failed", 1),
            }
            CaptionRow {
                query_id: r.id,
                image_id: r.sample.parent_image_id,
                complexity: r.sample.complexity,
                outcome,
            }
        })
        .collect();
    write_jsonl(out, &out_rows)?;
    Ok(counts)
}

/// Queries for one task: a file of split rows or caption rows and the
/// negatives requested per query.
pub struct HardnegTask<'a> {
    pub task: Task,
    pub queries: &'a Path,
    pub counts: HnCounts,
}

pub struct HardnegInputs<'a> {
    pub scene_graphs: &'a Path,
    pub wordnet: &'a Path,
    pub lexicon: Option<&'a Path>,
}

/// Checks the invariants every emitted row must satisfy.
pub fn check_hn_row(row: &HnOutputRow) -> Result<(), PipelineError> {
    let r = &row.row;
    let bad = |why: &str| {
        Err(PipelineError::Schema(format!(
            "hard negatives for {}: {why}",
            r.query_id
        )))
    };
    if r.negatives.len() + r.shortfall != r.requested {
        return bad("emitted plus shortfall differs from requested");
    }
    let mut texts = BTreeSet::new();
    for n in &r.negatives {
        if !n.verified {
            return bad("unverified negative");
        }
        if n.hn_type != r.hn_type {
            return bad("negative type differs from row type");
        }
        if n.text.trim().eq_ignore_ascii_case(r.gt.trim()) {
            return bad("negative equals the ground truth");
        }
        if !texts.insert(n.text.as_str()) {
            return bad("duplicate negative");
        }
    }
    Ok(())
}

/// Generates verified hard negatives for every task's queries.
pub fn hardneg(
    tasks: &[HardnegTask],
    inputs: &HardnegInputs,
    seed: u64,
    out: &Path,
) -> Result<Counts, PipelineError> {
    let lexicon = load_lexicon(inputs.lexicon)?;
    let lexical = LexicalDb::load(inputs.wordnet)?;
    let (graphs, _) = load_scene_graphs(inputs.scene_graphs)?;
    let parents = graphs_by_id(graphs);
    let generator = HardNegGenerator::new(&lexicon, &lexical);
    let mut counts = Counts::new();
    let mut out_rows = Vec::new();
    for t in tasks {
        let task = t.task.as_str();
        let rows: Vec<QueryRow> = read_rows(t.queries)?;
        let mut queries = Vec::with_capacity(rows.len());
        for r in &rows {
            let Some(text) = r.usable_text() else {
                count(&mut counts, format!("{task}_unusable"), 1);
                continue;
            };
            if t.task == Task::Systematicity && r.split == Some(SplitLabel::UA) {
                count(&mut counts, format!("{task}_excluded_ua"), 1);
                continue;
            }
            let Some(parent) = parents.get(&r.image_id) else {
                count(&mut counts, format!("{task}_no_parent"), 1);
                continue;
            };
            queries.push(HnQuery {
                query_id: &r.query_id,
                caption: text,
                parent,
                complexity: r.complexity,
            });
        }
        count(&mut counts, format!("{task}_queries"), queries.len());
        let config = HnConfig {
            counts: t.counts,
            seed,
        };
        for row in generate_all(&generator, &queries, &config) {
            let hn = row.hn_type.as_str();
            count(
                &mut counts,
                format!("{task}_{hn}_negatives"),
                row.negatives.len(),
            );
            count(&mut counts, format!("{task}_{hn}_shortfall"), row.shortfall);
            let row = HnOutputRow { task: t.task, row };
            check_hn_row(&row)?;
            out_rows.push(row);
        }
    }
    write_jsonl(out, &out_rows)?;
    Ok(counts)
}

/// Cosine similarity between per-id embedding vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingScorer(pub Embeddings);

impl Scorer<f64> for EmbeddingScorer {
    fn score(&self, query_id: &str, candidate_id: &str) -> Option<f64> {
        let v = &self.0.vectors;
        Some(f64::from(Embeddings::cosine(
            v.get(query_id)?,
            v.get(candidate_id)?,
        )))
    }
}

fn check_scorer_coverage(
    name: &str,
    scorer: &dyn Scorer<f64>,
    items: &[RetrievalItem],
) -> Result<(), PipelineError> {
    for item in items {
        for c in &item.candidate_ids {
            match scorer.score(&item.query_id, c) {
                Some(s) if s.is_finite() => {}
                Some(_) => {
                    return Err(EvalError::NonFiniteScore {
                        query_id: item.query_id.clone(),
                        candidate_id: c.clone(),
                    }
                    .into())
                }
                None => {
                    log::error!("scores {name:?} do not cover the retrieval sets");
                    return Err(EvalError::ScoreCoverage {
                        query_id: item.query_id.clone(),
                        candidate_id: c.clone(),
                    }
                    .into());
                }
            }
        }
    }
    Ok(())
}

/// Loads an external score source.
pub fn load_scores(source: &ScoreSource) -> Result<Box<dyn Scorer<f64>>, PipelineError> {
    Ok(match source.format {
        ScoreFormat::Jsonl => Box::new(ScoreTable::load_jsonl(&source.path)?),
        ScoreFormat::Matrix => Box::new(ScoreTable::load_matrix(&source.path)?),
        ScoreFormat::Embeddings => Box::new(EmbeddingScorer(Embeddings::load(&source.path)?)),
    })
}

pub struct EvalInputs<'a> {
    pub hardneg: Option<&'a Path>,
    pub splits: Option<&'a Path>,
    pub captions: Option<&'a Path>,
    pub scores: &'a [ScoreSource],
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EvalParams {
    pub fold_size: usize,
    pub max_folds: usize,
    /// Reference scorers to run: oracle, random, bow.
    pub scorers: Vec<String>,
    pub random_seed: u64,
    pub seed: u64,
}

pub struct EvalOutputs {
    pub metrics: PathBuf,
    pub items: PathBuf,
    pub texts: PathBuf,
}

#[derive(Default)]
struct TaskSets {
    strata: QueryStrata,
    raw: Vec<RawRecord>,
    hn: Vec<RetrievalItem>,
    folds: Vec<Vec<RetrievalItem>>,
}

/// Builds HN and RAW retrieval sets and scores them with every scorer.
pub fn eval(
    inputs: &EvalInputs,
    params: &EvalParams,
    out: &EvalOutputs,
) -> Result<Counts, PipelineError> {
    let mut counts = Counts::new();
    let mut texts: BTreeMap<String, String> = BTreeMap::new();
    let mut sets: BTreeMap<Task, TaskSets> = BTreeMap::new();

    if let Some(path) = inputs.splits {
        let s = sets.entry(Task::Systematicity).or_default();
        for r in read_rows::<SplitRow>(path)? {
            let stratum = Stratum::split(r.split);
            let image = Task::Systematicity.image_key(&r.caption_id);
            s.strata.insert(r.caption_id.clone(), stratum);
            texts.insert(image.clone(), r.text.clone());
            texts.insert(r.caption_id.clone(), r.text);
            s.raw.push(RawRecord {
                image_id: image,
                caption_id: r.caption_id,
                stratum,
            });
        }
    }
    if let Some(path) = inputs.captions {
        let s = sets.entry(Task::Productivity).or_default();
        for r in read_rows::<CaptionRow>(path)? {
            let Some(text) = r.accepted_text() else {
                continue;
            };
            let stratum = Stratum::complexity(r.complexity);
            let image = Task::Productivity.image_key(&r.query_id);
            s.strata.insert(r.query_id.clone(), stratum);
            texts.insert(image.clone(), text.to_string());
            texts.insert(r.query_id.clone(), text.to_string());
            s.raw.push(RawRecord {
                image_id: image,
                caption_id: r.query_id,
                stratum,
            });
        }
    }
    if let Some(path) = inputs.hardneg {
        let rows: Vec<HnOutputRow> = read_rows(path)?;
        for task in Task::ALL {
            let task_rows: Vec<_> = rows
                .iter()
                .filter(|r| r.task == task)
                .map(|r| r.row.clone())
                .collect();
            if task_rows.is_empty() {
                continue;
            }
            let s = sets.entry(task).or_default();
            let types: BTreeSet<HnType> = task_rows.iter().map(|r| r.hn_type).collect();
            let modes: &[bool] = if types.len() > 1 {
                &[false, true]
            } else {
                &[false]
            };
            for &combined in modes {
                let built = assemble_hn_sets(&task_rows, &s.strata, combined);
                count(
                    &mut counts,
                    format!("{}_hn_excluded", task.as_str()),
                    built.excluded,
                );
                count(
                    &mut counts,
                    format!("{}_hn_duplicates", task.as_str()),
                    built.duplicates,
                );
                texts.extend(built.texts);
                for mut item in built.items {
                    item.query_id = task.image_key(&item.query_id);
                    if !texts.contains_key(&item.query_id) {
                        let gt = texts.get(&item.gt_id).cloned().unwrap_or_default();
                        texts.insert(item.query_id.clone(), gt);
                    }
                    s.hn.push(item);
                }
            }
        }
    }

    let directions = [Direction::ImageToText, Direction::TextToImage];
    for (task, s) in sets.iter_mut() {
        let mut by_stratum: BTreeMap<Stratum, Vec<RawRecord>> = BTreeMap::new();
        for r in s.raw.drain(..) {
            by_stratum.entry(r.stratum).or_default().push(r);
        }
        let mut usable = Vec::new();
        for (stratum, recs) in by_stratum {
            if recs.len() < params.fold_size {
                log::info!(
                    "{}: stratum {stratum} has {} records, fewer than the fold size {}; no RAW folds",
                    task.as_str(),
                    recs.len(),
                    params.fold_size
                );
                count(
                    &mut counts,
                    format!("{}_raw_strata_dropped", task.as_str()),
                    1,
                );
            } else {
                usable.extend(recs);
            }
        }
        if !usable.is_empty() {
            s.folds = assemble_raw_folds(
                &usable,
                params.fold_size,
                params.max_folds,
                params.seed,
                &directions,
            )?;
        }
        count(
            &mut counts,
            format!("{}_hn_items", task.as_str()),
            s.hn.len(),
        );
        count(
            &mut counts,
            format!("{}_raw_folds", task.as_str()),
            s.folds.len(),
        );
        count(
            &mut counts,
            format!("{}_raw_items", task.as_str()),
            s.folds.iter().map(Vec::len).sum(),
        );
    }

    let all_items: Vec<RetrievalItem> = sets
        .values()
        .flat_map(|s| s.hn.iter().chain(s.folds.iter().flatten()))
        .cloned()
        .collect();
    let mut scorers: Vec<(String, Box<dyn Scorer<f64>>)> = Vec::new();
    for name in &params.scorers {
        let scorer: Box<dyn Scorer<f64>> = match name.as_str() {
            "oracle" => Box::new(OracleScorer::from_items(&all_items)),
            "random" => Box::new(RandomScorer::new(params.random_seed)),
            "bow" => Box::new(BowScorer::new(&all_items, &texts)),
            other => return Err(PipelineError::Config(format!("unknown scorer {other:?}"))),
        };
        scorers.push((name.clone(), scorer));
    }
    for source in inputs.scores {
        let scorer = load_scores(source)?;
        check_scorer_coverage(&source.name, scorer.as_ref(), &all_items)?;
        scorers.push((source.name.clone(), scorer));
    }

    let mut metrics = Vec::new();
    for (task, s) in &sets {
        for (name, scorer) in &scorers {
            let mut report = MetricsReport {
                scorer: name.clone(),
                rows: Vec::new(),
            };
            if !s.hn.is_empty() {
                report
                    .rows
                    .extend(evaluate(&s.hn, scorer.as_ref(), name)?.rows);
            }
            if s.folds.iter().any(|f| !f.is_empty()) {
                report
                    .rows
                    .extend(kfold_summary(&s.folds, scorer.as_ref(), name)?.rows);
            }
            if !report.rows.is_empty() {
                metrics.push(MetricsRow {
                    task: *task,
                    report,
                });
            }
        }
    }

    let mut item_rows = Vec::new();
    for (task, s) in &sets {
        item_rows.extend(s.hn.iter().map(|item| ItemRow {
            task: *task,
            set: SetKind::Hn,
            fold: None,
            item: item.clone(),
        }));
        for (f, fold) in s.folds.iter().enumerate() {
            item_rows.extend(fold.iter().map(|item| ItemRow {
                task: *task,
                set: SetKind::Raw,
                fold: Some(f),
                item: item.clone(),
            }));
        }
    }
    let text_rows: Vec<TextRow> = texts
        .into_iter()
        .map(|(id, text)| TextRow { id, text })
        .collect();
    count(&mut counts, "scorers", scorers.len());
    count(&mut counts, "metric_reports", metrics.len());
    write_jsonl(&out.metrics, &metrics)?;
    write_jsonl(&out.items, &item_rows)?;
    write_jsonl(&out.texts, &text_rows)?;
    Ok(counts)
}

/// Writes the metrics as one CSV and one Markdown report.
pub fn report(metrics: &Path, csv: &Path, markdown: &Path) -> Result<Counts, PipelineError> {
    let rows: Vec<MetricsRow> = read_rows(metrics)?;
    let mut by_task: BTreeMap<Task, Vec<MetricsReport>> = BTreeMap::new();
    for r in rows {
        by_task.entry(r.task).or_default().push(r.report);
    }
    let mut csv_text = String::new();
    let mut md = String::from("# Retrieval benchmark report\n");
    let mut lines = 0;
    for (task, reports) in &by_task {
        let table = forge_core::eval::to_csv(reports);
        let mut it = table.lines();
        if let Some(header) = it.next() {
            if csv_text.is_empty() {
                csv_text.push_str("task,");
                csv_text.push_str(header);
                csv_text.push('\n');
            }
        }
        for line in it {
            csv_text.push_str(task.as_str());
            csv_text.push(',');
            csv_text.push_str(line);
            csv_text.push('\n');
            lines += 1;
        }
        let title = match task {
            Task::Systematicity => "Systematicity",
            Task::Productivity => "Productivity",
        };
        md.push_str(&format!("\n## {title}\n\n"));
        md.push_str(&forge_core::eval::to_markdown(reports));
    }
    if csv_text.is_empty() {
        csv_text = format!("task,{}", forge_core::eval::to_csv::<f64>(&[]));
    }
    for (path, body) in [(csv, &csv_text), (markdown, &md)] {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| PipelineError::file(dir, e))?;
        }
        write_atomic(path, |w| std::io::Write::write_all(w, body.as_bytes()))?;
    }
    let mut counts = Counts::new();
    count(&mut counts, "rows", lines);
    count(&mut counts, "tasks", by_task.len());
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use forge_core::hardneg::{HardNegative, HnRow};

    fn row(negs: &[&str], requested: usize) -> HnOutputRow {
        HnOutputRow {
            task: Task::Productivity,
            row: HnRow {
                query_id: "q".into(),
                gt: "a black dog".into(),
                hn_type: HnType::Atom,
                negatives: negs
                    .iter()
                    .map(|t| HardNegative {
                        text: t.to_string(),
                        hn_type: HnType::Atom,
                        provenance: String::new(),
                        verified: true,
                    })
                    .collect(),
                requested,
                shortfall: requested.saturating_sub(negs.len()),
                note: None,
            },
        }
    }

    #[test]
    fn row_checks() {
        assert!(check_hn_row(&row(&["a white dog", "a black cat"], 3)).is_ok());
        assert!(check_hn_row(&row(&["a white dog", "a white dog"], 2)).is_err());
        assert!(check_hn_row(&row(&["A black dog"], 1)).is_err());
        let mut r = row(&["a white dog"], 1);
        r.row.shortfall = 1;
        assert!(check_hn_row(&r).is_err());
        let mut r = row(&["a white dog"], 1);
        r.row.negatives[0].verified = false;
        assert!(check_hn_row(&r).is_err());
    }

    #[test]
    fn index_shards_match_single_pass() {
        let lex = Lexicon::bundled();
        let texts = [
            "a black dog",
            "a red car near a tall tree",
            "qq",
            "a man holding a cup",
        ];
        let records: Vec<CaptionRecord> = (0..3 * INDEX_CHUNK)
            .map(|i| {
                let mut r = CaptionRecord::new(i.to_string(), texts[i % texts.len()]).unwrap();
                r.graph = parse_caption(&r.text, &lex).ok();
                r
            })
            .collect();
        let sharded = index_records(&records);
        let single = build_seen_index(
            "train",
            records.iter().map(|r| r.graph.clone().ok_or("unparsed")),
        );
        assert_eq!(sharded.atoms, single.atoms);
        assert_eq!(sharded.compounds, single.compounds);
        assert_eq!(
            (sharded.record_count, sharded.skipped),
            (single.record_count, single.skipped)
        );
    }
}
