use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{EvalError, RetrievalItem};
use crate::io::{read_jsonl_strict, read_lines, write_atomic, IoError};
use crate::scalar::Score;

/// Similarity of a query to a candidate; `None` when unknown.
pub trait Scorer<S>: Sync {
    fn score(&self, query_id: &str, candidate_id: &str) -> Option<S>;
}

/// Magic bytes of the dense matrix format.
const MATRIX_MAGIC: &[u8; 4] = b"FSCM";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Triple {
    query_id: String,
    candidate_id: String,
    score: f64,
}

/// Precomputed scores keyed by (query, candidate).
///
/// Scores are similarities, so a pair missing in one direction is looked
/// up in the other.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable<S> {
    scores: HashMap<String, HashMap<String, S>>,
    pub source: String,
}

impl<S: Score> ScoreTable<S> {
    pub fn new(source: impl Into<String>) -> Self {
        ScoreTable {
            scores: HashMap::new(),
            source: source.into(),
        }
    }

    pub fn insert(&mut self, query_id: &str, candidate_id: &str, score: S) {
        self.scores
            .entry(query_id.to_string())
            .or_default()
            .insert(candidate_id.to_string(), score);
    }

    pub fn len(&self) -> usize {
        self.scores.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reads `{"query_id", "candidate_id", "score"}` lines.
    pub fn load_jsonl(path: &Path) -> Result<Self, EvalError> {
        let triples: Vec<Triple> = read_jsonl_strict(path)?;
        let mut table = ScoreTable::new(path.display().to_string());
        for t in triples {
            let s = S::from_f64(t.score).ok_or_else(|| format_error(path, "score out of range"))?;
            table.insert(&t.query_id, &t.candidate_id, s);
        }
        Ok(table)
    }

    /// Reads a dense matrix: magic `FSCM`, value width in bytes (4 or 8),
    /// row and column counts as little-endian `u32`, row ids then column
    /// ids as length-prefixed UTF-8, then row-major little-endian floats.
    pub fn load_matrix(path: &Path) -> Result<Self, EvalError> {
        let file = File::open(path).map_err(|e| IoError::io(path, e))?;
        let mut r = BufReader::new(file);
        let bad = |m: &str| format_error(path, m);
        let io = |e: std::io::Error| EvalError::from(IoError::io(path, e));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MATRIX_MAGIC {
            return Err(bad("not a score matrix"));
        }
        let width = r.read_u8().map_err(io)?;
        if width != 4 && width != 8 {
            return Err(bad("value width must be 4 or 8"));
        }
        let rows = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let cols = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let mut read_ids = |n: usize| -> Result<Vec<String>, EvalError> {
            (0..n)
                .map(|_| {
                    let len = r.read_u32::<LittleEndian>().map_err(io)? as usize;
                    let mut buf = vec![0u8; len];
                    r.read_exact(&mut buf).map_err(io)?;
                    String::from_utf8(buf).map_err(|_| bad("id is not UTF-8"))
                })
                .collect()
        };
        let row_ids = read_ids(rows)?;
        let col_ids = read_ids(cols)?;
        let mut table = ScoreTable::new(path.display().to_string());
        for q in &row_ids {
            for c in &col_ids {
                let v = if width == 4 {
                    f64::from(r.read_f32::<LittleEndian>().map_err(io)?)
                } else {
                    r.read_f64::<LittleEndian>().map_err(io)?
                };
                table.insert(
                    q,
                    c,
                    S::from_f64(v).ok_or_else(|| bad("score out of range"))?,
                );
            }
        }
        if r.read_u8().is_ok() {
            return Err(bad("trailing bytes after matrix"));
        }
        Ok(table)
    }

    /// Writes the dense matrix format with 8-byte values; missing pairs
    /// are written as NaN.
    pub fn write_matrix(
        &self,
        path: &Path,
        row_ids: &[String],
        col_ids: &[String],
    ) -> Result<(), EvalError> {
        write_atomic(path, |w| {
            w.write_all(MATRIX_MAGIC)?;
            w.write_u8(8)?;
            w.write_u32::<LittleEndian>(row_ids.len() as u32)?;
            w.write_u32::<LittleEndian>(col_ids.len() as u32)?;
            for id in row_ids.iter().chain(col_ids) {
                w.write_u32::<LittleEndian>(id.len() as u32)?;
                w.write_all(id.as_bytes())?;
            }
            for q in row_ids {
                for c in col_ids {
                    let v = self
                        .lookup(q, c)
                        .and_then(|s| s.to_f64())
                        .unwrap_or(f64::NAN);
                    w.write_f64::<LittleEndian>(v)?;
                }
            }
            Ok(())
        })?;
        Ok(())
    }

    /// Scores every pair of `items` with `scorer`.
    pub fn materialize(items: &[RetrievalItem], scorer: &dyn Scorer<S>, source: &str) -> Self {
        let mut table = ScoreTable::new(source);
        for item in items {
            for c in &item.candidate_ids {
                if let Some(s) = scorer.score(&item.query_id, c) {
                    table.insert(&item.query_id, c, s);
                }
            }
        }
        table
    }

    /// Fails on the first pair of `items` without a finite score.
    pub fn check_coverage(&self, items: &[RetrievalItem]) -> Result<(), EvalError> {
        for item in items {
            for c in &item.candidate_ids {
                match self.lookup(&item.query_id, c) {
                    None => {
                        return Err(EvalError::ScoreCoverage {
                            query_id: item.query_id.clone(),
                            candidate_id: c.clone(),
                        })
                    }
                    Some(s) if !s.is_finite() => {
                        return Err(EvalError::NonFiniteScore {
                            query_id: item.query_id.clone(),
                            candidate_id: c.clone(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    fn lookup(&self, q: &str, c: &str) -> Option<S> {
        self.scores
            .get(q)
            .and_then(|m| m.get(c))
            .or_else(|| self.scores.get(c).and_then(|m| m.get(q)))
            .copied()
    }
}

impl<S: Score> Scorer<S> for ScoreTable<S> {
    fn score(&self, query_id: &str, candidate_id: &str) -> Option<S> {
        self.lookup(query_id, candidate_id)
    }
}

fn format_error(path: &Path, message: &str) -> EvalError {
    EvalError::Io(IoError::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    })
}

/// Per-id vectors scored by cosine similarity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f32>>,
}

impl Embeddings {
    /// Reads a `dim=<d>` header, then `<id>\t<v1> <v2> ...` rows.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let lines = read_lines(path)?;
        let mut lines = lines.into_iter().filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, m: &str| {
            EvalError::Io(IoError::Record {
                path: path.to_path_buf(),
                line,
                message: m.to_string(),
            })
        };
        let (n, header) = lines
            .next()
            .ok_or_else(|| format_error(path, "empty embeddings file"))?;
        let dim: usize = header
            .trim()
            .strip_prefix("dim=")
            .and_then(|d| d.parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| bad(n, "expected header dim=<d>"))?;
        let mut vectors = BTreeMap::new();
        for (n, line) in lines {
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| bad(n, "expected <id>\\t<values>"))?;
            let v: Vec<f32> = rest
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| bad(n, "value is not a number"))?;
            if v.len() != dim {
                return Err(bad(n, &format!("expected {dim} values, found {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(bad(n, "value is not finite"));
            }
            if vectors.insert(id.to_string(), v).is_some() {
                return Err(bad(n, "duplicate id"));
            }
        }
        Ok(Embeddings { dim, vectors })
    }

    /// Cosine similarity; zero vectors score 0.
    pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
        let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
        let nb: f32 = b.iter().map(|x| x * x).sum::<f32>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }
}

impl Scorer<f32> for Embeddings {
    fn score(&self, query_id: &str, candidate_id: &str) -> Option<f32> {
        Some(Embeddings::cosine(
            self.vectors.get(query_id)?,
            self.vectors.get(candidate_id)?,
        ))
    }
}
