//! Resumable pipeline that turns scene-graph corpora into compositional
//! retrieval benchmarks: parse, index, split, sample, caption, generate
//! hard negatives, evaluate and report.
//!
//! Every stage writes through a staging directory and records a manifest
//! of content hashes, so reruns skip work whose inputs did not change.

pub mod cli;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod rows;
pub mod stages;

pub use config::{PipelineConfig, Stage};
pub use error::{ErrorReport, PipelineError, StageFailure};
pub use manifest::{Counts, Manifest, Outcome, StageJob};
pub use pipeline::{Pipeline, RunSummary};
