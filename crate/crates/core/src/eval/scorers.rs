//! Reference scorers used to check the evaluation harness.

use std::collections::{BTreeMap, HashMap, HashSet};

use sha2::{Digest, Sha256};

use super::{RetrievalItem, Scorer};
use crate::scalar::Score;

/// 1 for a query's ground truth, 0 otherwise.
#[derive(Debug, Clone, Default)]
pub struct OracleScorer {
    truth: HashMap<String, HashSet<String>>,
}

impl OracleScorer {
    pub fn from_items(items: &[RetrievalItem]) -> Self {
        let mut truth: HashMap<String, HashSet<String>> = HashMap::new();
        for item in items {
            truth
                .entry(item.query_id.clone())
                .or_default()
                .insert(item.gt_id.clone());
        }
        OracleScorer { truth }
    }
}

impl<S: Score> Scorer<S> for OracleScorer {
    fn score(&self, query_id: &str, candidate_id: &str) -> Option<S> {
        let hit = self
            .truth
            .get(query_id)
            .is_some_and(|t| t.contains(candidate_id));
        Some(if hit { S::one() } else { S::zero() })
    }
}

/// Uniform scores in [0, 1) from a hash of the seed and the pair.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl RandomScorer {
    pub fn new(seed: u64) -> Self {
        RandomScorer { seed }
    }

    pub fn uniform(&self, query_id: &str, candidate_id: &str) -> f64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(query_id.as_bytes());
        h.update([0u8]);
        h.update(candidate_id.as_bytes());
        let digest = h.finalize();
        let bits = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        (bits >> 11) as f64 / (1u64 << 53) as f64
    }
}

impl<S: Score> Scorer<S> for RandomScorer {
    fn score(&self, query_id: &str, candidate_id: &str) -> Option<S> {
        S::from_f64(self.uniform(query_id, candidate_id))
    }
}

/// Words left out of bags: articles and the conjunction.
const STOP_WORDS: &[&str] = &["a", "an", "the", "and"];

fn bag(text: &str) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for w in text
        .split(|c: char| !c.is_alphanumeric() && c != '\'')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !STOP_WORDS.contains(&w.as_str()))
    {
        *out.entry(w).or_insert(0.0) += 1.0;
    }
    out
}

fn bag_cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a
        .iter()
        .map(|(w, x)| x * b.get(w).copied().unwrap_or(0.0))
        .sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Cosine between word-count vectors, ignoring order. An image is
/// represented by the text of its ground-truth caption.
#[derive(Debug, Clone, Default)]
pub struct BowScorer {
    bags: HashMap<String, BTreeMap<String, f64>>,
}

impl BowScorer {
    /// `texts` maps candidate ids to caption text; every query takes the
    /// text of its item's ground truth.
    pub fn new(items: &[RetrievalItem], texts: &BTreeMap<String, String>) -> Self {
        let mut bags: HashMap<String, BTreeMap<String, f64>> =
            texts.iter().map(|(id, t)| (id.clone(), bag(t))).collect();
        for item in items {
            if let Some(t) = texts.get(&item.gt_id) {
                bags.entry(item.query_id.clone()).or_insert_with(|| bag(t));
            }
        }
        BowScorer { bags }
    }
}

impl<S: Score> Scorer<S> for BowScorer {
    fn score(&self, query_id: &str, candidate_id: &str) -> Option<S> {
        S::from_f64(bag_cosine(
            self.bags.get(query_id)?,
            self.bags.get(candidate_id)?,
        ))
    }
}
