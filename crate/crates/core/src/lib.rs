//! Construction and evaluation of compositional image-text retrieval
//! benchmarks.
//!
//! The pipeline parses captions into scene graphs, indexes the atoms and
//! compounds seen in a training corpus, splits test data into seen-compound,
//! unseen-compound and unseen-atom sets, samples fixed-complexity subgraphs
//! by random walk, renders them as captions, generates graph-verified hard
//! negatives and scores retrieval with Recall@K.
//!
//! Numeric code is generic over the scalar type (see [`scalar`]); the
//! aliases below fix the common choices.

pub mod caption;
pub mod eval;
pub mod hardneg;
pub mod index;
pub mod io;
pub mod lexical;
pub mod model;
pub mod parser;
pub mod sampler;
pub mod scalar;
pub mod seed;

pub use model::{Atom, AtomKind, CaptionRecord, Compound, ObjectNode, Region, RelEdge, SceneGraph};

/// Filter thresholds in `f64`.
pub type FilterPolicy = index::FilterPolicy<f64>;
/// Filter thresholds as exact rationals.
pub type ExactFilterPolicy = index::FilterPolicy<num_rational::Ratio<i64>>;
/// Scores read from files.
pub type ScoreTable = eval::ScoreTable<f64>;
/// Scores derived from single-precision embeddings.
pub type ScoreTableF32 = eval::ScoreTable<f32>;
/// Walk configuration with the default overlap scalar.
pub type WalkConfig = sampler::WalkConfig<f64>;
/// Metrics in `f64`.
pub type MetricsReport = eval::MetricsReport<f64>;
