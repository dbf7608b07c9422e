//! Retrieval sets, Recall@K and K-fold summaries.
//!
//! Candidates are ranked by descending score. Ties rank the ground truth
//! last, so a scorer that cannot tell candidates apart gets no credit.

mod report;
mod score;
mod scorers;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{to_csv, to_markdown};
pub use score::{Embeddings, ScoreTable, Scorer};
pub use scorers::{BowScorer, OracleScorer, RandomScorer};

use crate::hardneg::{HnRow, HnType};
use crate::index::SplitLabel;
use crate::io::IoError;
use crate::scalar::Score;
use crate::seed::rng_for;

/// Ks reported for every stratum.
pub const RECALL_KS: [usize; 3] = [1, 3, 5];
/// Upper bound on the number of RAW folds.
pub const MAX_FOLDS: usize = 20;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid retrieval item {query_id}: {reason}")]
    InvalidItem { query_id: String, reason: String },
    #[error("no score for query {query_id} and candidate {candidate_id}")]
    ScoreCoverage {
        query_id: String,
        candidate_id: String,
    },
    #[error("score for query {query_id} and candidate {candidate_id} is not finite")]
    NonFiniteScore {
        query_id: String,
        candidate_id: String,
    },
    #[error("stratum {stratum} has {available} records, fewer than the fold size {n}")]
    InsufficientData {
        stratum: String,
        available: usize,
        n: usize,
    },
    #[error("fold size must be positive")]
    ZeroFoldSize,
    #[error("no folds to summarize")]
    NoFolds,
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ImageToText,
    TextToImage,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::ImageToText => "i2t",
            Direction::TextToImage => "t2i",
        }
    }
}

/// Which hard negatives fill a candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HnMode {
    Atom,
    Comp,
    Swap,
    Neg,
    /// All types of a query pooled.
    Combined,
}

impl From<HnType> for HnMode {
    fn from(t: HnType) -> Self {
        match t {
            HnType::Atom => HnMode::Atom,
            HnType::Comp => HnMode::Comp,
            HnType::Swap => HnMode::Swap,
            HnType::Neg => HnMode::Neg,
        }
    }
}

impl HnMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HnMode::Atom => "atom",
            HnMode::Comp => "comp",
            HnMode::Swap => "swap",
            HnMode::Neg => "neg",
            HnMode::Combined => "combined",
        }
    }
}

/// Grouping key for reported metrics.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Stratum {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hn: Option<HnMode>,
}

impl Stratum {
    pub fn split(split: SplitLabel) -> Self {
        Stratum {
            split: Some(split),
            ..Stratum::default()
        }
    }

    pub fn complexity(n: usize) -> Self {
        Stratum {
            complexity: Some(n),
            ..Stratum::default()
        }
    }

    pub fn with_hn(self, hn: HnMode) -> Self {
        Stratum {
            hn: Some(hn),
            ..self
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(s) = self.split {
            parts.push(s.to_string());
        }
        if let Some(n) = self.complexity {
            parts.push(format!("n={n}"));
        }
        if let Some(h) = self.hn {
            parts.push(h.as_str().to_string());
        }
        if parts.is_empty() {
            f.write_str("all")
        } else {
            f.write_str(&parts.join("/"))
        }
    }
}

/// One query with its ranked-against candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalItem {
    pub query_id: String,
    pub gt_id: String,
    pub candidate_ids: Vec<String>,
    pub stratum: Stratum,
    pub direction: Direction,
}

impl RetrievalItem {
    /// Checks that the ground truth is a candidate and candidates are unique.
    pub fn new(
        query_id: impl Into<String>,
        gt_id: impl Into<String>,
        candidate_ids: Vec<String>,
        stratum: Stratum,
        direction: Direction,
    ) -> Result<Self, EvalError> {
        let item = RetrievalItem {
            query_id: query_id.into(),
            gt_id: gt_id.into(),
            candidate_ids,
            stratum,
            direction,
        };
        item.validate()?;
        Ok(item)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let invalid = |reason: &str| EvalError::InvalidItem {
            query_id: self.query_id.clone(),
            reason: reason.to_string(),
        };
        if !self.candidate_ids.contains(&self.gt_id) {
            return Err(invalid("ground truth is not a candidate"));
        }
        let unique: HashSet<&String> = self.candidate_ids.iter().collect();
        if unique.len() != self.candidate_ids.len() {
            return Err(invalid("duplicate candidates"));
        }
        Ok(())
    }

    /// 1-based rank of the ground truth; ties go against it.
    pub fn gt_rank<S: Score>(&self, scorer: &dyn Scorer<S>) -> Result<usize, EvalError> {
        let score = |c: &str| -> Result<S, EvalError> {
            let s = scorer
                .score(&self.query_id, c)
                .ok_or_else(|| EvalError::ScoreCoverage {
                    query_id: self.query_id.clone(),
                    candidate_id: c.to_string(),
                })?;
            if s.is_finite() {
                Ok(s)
            } else {
                Err(EvalError::NonFiniteScore {
                    query_id: self.query_id.clone(),
                    candidate_id: c.to_string(),
                })
            }
        };
        let gt = score(&self.gt_id)?;
        let mut rank = 1;
        for c in &self.candidate_ids {
            if *c != self.gt_id && score(c)? >= gt {
                rank += 1;
            }
        }
        Ok(rank)
    }
}

fn ratio<S: Score>(hits: usize, total: usize) -> S {
    if total == 0 {
        return S::zero();
    }
    S::from_usize(hits).expect("count fits") / S::from_usize(total).expect("count fits")
}

fn ranks<S: Score>(
    items: &[RetrievalItem],
    scorer: &dyn Scorer<S>,
) -> Result<Vec<usize>, EvalError> {
    items.par_iter().map(|item| item.gt_rank(scorer)).collect()
}

/// Fraction of items whose ground truth ranks within the top `k`.
pub fn recall_at_k<S: Score>(
    items: &[RetrievalItem],
    scorer: &dyn Scorer<S>,
    k: usize,
) -> Result<S, EvalError> {
    let ranks = ranks(items, scorer)?;
    Ok(ratio(
        ranks.iter().filter(|&&r| r <= k).count(),
        ranks.len(),
    ))
}

/// Mean of the reported Recall@K values.
pub fn average_recall<S: Score>(recalls: &[S]) -> S {
    if recalls.is_empty() {
        return S::zero();
    }
    recalls.iter().fold(S::zero(), |a, &b| a + b) / S::from_usize(recalls.len()).expect("small")
}

/// Mean and population standard deviation.
pub fn mean_std<S: Score>(values: &[S]) -> (S, S) {
    if values.is_empty() {
        return (S::zero(), S::zero());
    }
    let n = S::from_usize(values.len()).expect("small");
    let mean = values.iter().fold(S::zero(), |a, &b| a + b) / n;
    let var = values
        .iter()
        .fold(S::zero(), |a, &b| a + (b - mean) * (b - mean))
        / n;
    (mean, var.sqrt())
}

/// Recall@1 across RAW folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldStats<S> {
    pub fold_count: usize,
    pub mean_recall_at_1: S,
    pub std_recall_at_1: S,
    pub per_fold: Vec<S>,
}

/// Metrics for one stratum and direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumMetrics<S> {
    pub stratum: Stratum,
    pub direction: Direction,
    pub items: usize,
    /// Aligned with [`RECALL_KS`].
    pub recall_at: [S; 3],
    pub avg_recall_at_k: S,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<FoldStats<S>>,
}

impl<S: Score> StratumMetrics<S> {
    fn from_ranks(stratum: Stratum, direction: Direction, ranks: &[usize]) -> Self {
        let recall_at =
            RECALL_KS.map(|k| ratio(ranks.iter().filter(|&&r| r <= k).count(), ranks.len()));
        StratumMetrics {
            stratum,
            direction,
            items: ranks.len(),
            recall_at,
            avg_recall_at_k: average_recall(&recall_at),
            folds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<S> {
    pub scorer: String,
    /// Ordered by stratum, then direction.
    pub rows: Vec<StratumMetrics<S>>,
}

impl<S: Score> MetricsReport<S> {
    pub fn row(&self, stratum: &Stratum, direction: Direction) -> Option<&StratumMetrics<S>> {
        self.rows
            .iter()
            .find(|r| r.stratum == *stratum && r.direction == direction)
    }
}

fn group<'a, T>(
    items: impl IntoIterator<Item = (&'a RetrievalItem, T)>,
) -> BTreeMap<(Stratum, Direction), Vec<T>> {
    let mut out: BTreeMap<(Stratum, Direction), Vec<T>> = BTreeMap::new();
    for (item, v) in items {
        out.entry((item.stratum, item.direction))
            .or_default()
            .push(v);
    }
    out
}

/// Recall@{1,3,5} per stratum and direction.
pub fn evaluate<S: Score>(
    items: &[RetrievalItem],
    scorer: &dyn Scorer<S>,
    scorer_name: &str,
) -> Result<MetricsReport<S>, EvalError> {
    let ranks = ranks(items, scorer)?;
    let rows = group(items.iter().zip(ranks))
        .into_iter()
        .map(|((stratum, direction), r)| StratumMetrics::from_ranks(stratum, direction, &r))
        .collect();
    Ok(MetricsReport {
        scorer: scorer_name.to_string(),
        rows,
    })
}

/// Per-fold Recall@1 summarized per stratum and direction, with recall at
/// every K pooled over all folds. A stratum's fold count is the number of
/// folds it has items in.
pub fn kfold_summary<S: Score>(
    folds: &[Vec<RetrievalItem>],
    scorer: &dyn Scorer<S>,
    scorer_name: &str,
) -> Result<MetricsReport<S>, EvalError> {
    if folds.iter().all(Vec::is_empty) {
        return Err(EvalError::NoFolds);
    }
    let mut pooled: BTreeMap<(Stratum, Direction), Vec<usize>> = BTreeMap::new();
    let mut per_fold: BTreeMap<(Stratum, Direction), Vec<S>> = BTreeMap::new();
    for fold in folds {
        let ranks = ranks(fold, scorer)?;
        for (key, r) in group(fold.iter().zip(ranks)) {
            per_fold
                .entry(key)
                .or_default()
                .push(ratio(r.iter().filter(|&&x| x <= 1).count(), r.len()));
            pooled.entry(key).or_default().extend(r);
        }
    }
    let rows = pooled
        .into_iter()
        .map(|((stratum, direction), r)| {
            let mut row = StratumMetrics::from_ranks(stratum, direction, &r);
            let values = per_fold.remove(&(stratum, direction)).unwrap_or_default();
            let (mean, std) = mean_std(&values);
            row.folds = Some(FoldStats {
                fold_count: values.len(),
                mean_recall_at_1: mean,
                std_recall_at_1: std,
                per_fold: values,
            });
            row
        })
        .collect();
    Ok(MetricsReport {
        scorer: scorer_name.to_string(),
        rows,
    })
}

/// K = min(cap, floor(available / n)); at least one fold is required.
pub fn fold_count(available: usize, n: usize, cap: usize) -> Option<usize> {
    if n == 0 {
        return None;
    }
    let k = (available / n).min(cap);
    (k > 0).then_some(k)
}

/// An image region paired with its caption in a RAW test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub image_id: String,
    pub caption_id: String,
    pub stratum: Stratum,
}

/// Splits each stratum into K folds of `n` records drawn without
/// replacement. Fold `i` of the result holds fold `i` of every stratum
/// that has one; a query's candidates are all captions (or images) of
/// its own stratum's fold.
pub fn assemble_raw_folds(
    records: &[RawRecord],
    n: usize,
    cap: usize,
    seed: u64,
    directions: &[Direction],
) -> Result<Vec<Vec<RetrievalItem>>, EvalError> {
    if n == 0 {
        return Err(EvalError::ZeroFoldSize);
    }
    let mut by_stratum: BTreeMap<Stratum, Vec<&RawRecord>> = BTreeMap::new();
    for r in records {
        by_stratum.entry(r.stratum).or_default().push(r);
    }
    let mut folds: Vec<Vec<RetrievalItem>> = Vec::new();
    for (stratum, recs) in by_stratum {
        let k = fold_count(recs.len(), n, cap).ok_or_else(|| EvalError::InsufficientData {
            stratum: stratum.to_string(),
            available: recs.len(),
            n,
        })?;
        let mut rng = rng_for(seed, &format!("folds/{stratum}"));
        let picked = sample(&mut rng, recs.len(), k * n).into_vec();
        if folds.len() < k {
            folds.resize_with(k, Vec::new);
        }
        for (f, chunk) in picked.chunks(n).enumerate() {
            let members: Vec<&RawRecord> = chunk.iter().map(|&i| recs[i]).collect();
            let captions: Vec<String> = members.iter().map(|r| r.caption_id.clone()).collect();
            let images: Vec<String> = members.iter().map(|r| r.image_id.clone()).collect();
            for &direction in directions {
                for r in &members {
                    let item = match direction {
                        Direction::ImageToText => RetrievalItem::new(
                            &r.image_id,
                            &r.caption_id,
                            captions.clone(),
                            stratum,
                            direction,
                        )?,
                        Direction::TextToImage => RetrievalItem::new(
                            &r.caption_id,
                            &r.image_id,
                            images.clone(),
                            stratum,
                            direction,
                        )?,
                    };
                    folds[f].push(item);
                }
            }
        }
    }
    Ok(folds)
}

/// Split and complexity of the query behind each hard-negative row.
pub type QueryStrata = BTreeMap<String, Stratum>;

/// Candidate sets built from hard-negative rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HnSets {
    pub items: Vec<RetrievalItem>,
    /// Caption text for every candidate id.
    pub texts: BTreeMap<String, String>,
    /// Rows (or pooled queries) left without negatives.
    pub excluded: usize,
    /// Negatives dropped as repeats of another candidate.
    pub duplicates: usize,
}

/// Query, mode, ground truth and typed negatives.
type HnGroup<'a> = (&'a str, HnMode, &'a str, Vec<(HnType, &'a str)>);

/// One image-to-text item per row, or per query with `combined`. The
/// query id is the row's query; candidates are `<query>/<mode>#gt` and
/// `<query>/<mode>#<type><k>`.
pub fn assemble_hn_sets(rows: &[HnRow], strata: &QueryStrata, combined: bool) -> HnSets {
    let mut out = HnSets::default();
    let mut groups: Vec<HnGroup> = Vec::new();
    for row in rows {
        let negs = row.negatives.iter().map(|h| (h.hn_type, h.text.as_str()));
        if combined {
            match groups.iter_mut().find(|g| g.0 == row.query_id) {
                Some(g) => g.3.extend(negs),
                None => groups.push((&row.query_id, HnMode::Combined, &row.gt, negs.collect())),
            }
        } else {
            groups.push((&row.query_id, row.hn_type.into(), &row.gt, negs.collect()));
        }
    }
    for (query_id, mode, gt, negs) in groups {
        let prefix = format!("{query_id}/{}", mode.as_str());
        let gt_id = format!("{prefix}#gt");
        let mut seen: BTreeSet<&str> = BTreeSet::from([gt]);
        let mut candidates = vec![(gt_id.clone(), gt)];
        let mut counters: BTreeMap<HnType, usize> = BTreeMap::new();
        for (t, text) in negs {
            if !seen.insert(text) {
                out.duplicates += 1;
                continue;
            }
            let k = counters.entry(t).or_default();
            candidates.push((format!("{prefix}#{t}{k}"), text));
            *k += 1;
        }
        if candidates.len() == 1 {
            out.excluded += 1;
            continue;
        }
        let stratum = strata
            .get(query_id)
            .copied()
            .unwrap_or_default()
            .with_hn(mode);
        out.texts
            .extend(candidates.iter().map(|(id, t)| (id.clone(), t.to_string())));
        out.items.push(RetrievalItem {
            query_id: query_id.to_string(),
            gt_id,
            candidate_ids: candidates.into_iter().map(|(id, _)| id).collect(),
            stratum,
            direction: Direction::ImageToText,
        });
    }
    out
}
