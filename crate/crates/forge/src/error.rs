use serde::Serialize;
use thiserror::Error;

use forge_core::caption::CaptionError;
use forge_core::eval::EvalError;
use forge_core::index::IndexError;
use forge_core::io::IoError;
use forge_core::lexical::LexicalError;
use forge_core::parser::ParseError;
use forge_core::sampler::SampleError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    /// An input row that does not match its schema.
    #[error("invalid input: {0}")]
    Input(String),
    /// A row this stage produced that fails its own schema check.
    #[error("schema check failed: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Caption(#[from] CaptionError),
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        PipelineError::File {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Input(_) => "input",
            PipelineError::Schema(_) => "schema",
            PipelineError::Io(_) | PipelineError::File { .. } => "io",
            PipelineError::Index(_) => "index",
            PipelineError::Sample(_) => "sample",
            PipelineError::Caption(_) => "caption",
            PipelineError::Lexical(_) => "lexical",
            PipelineError::Parse(_) => "parse",
            PipelineError::Eval(_) => "eval",
        }
    }

    /// 2 for configuration and input validation failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Input(_) => 2,
            PipelineError::Io(IoError::Record { .. } | IoError::Format { .. }) => 2,
            PipelineError::Caption(CaptionError::Config(_)) => 2,
            PipelineError::Index(IndexError::Policy(_)) => 2,
            PipelineError::Sample(SampleError::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }

    pub fn report(&self, stage: Option<&str>) -> ErrorReport {
        ErrorReport {
            status: "error",
            kind: self.kind(),
            stage: stage.map(str::to_string),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}

/// Machine-readable failure summary.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub status: &'static str,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    pub message: String,
    pub exit_code: i32,
}

/// A failure attributed to the stage that raised it.
#[derive(Debug, Error)]
#[error("stage {stage}: {source}")]
pub struct StageFailure {
    pub stage: String,
    #[source]
    pub source: PipelineError,
}

impl StageFailure {
    pub fn report(&self) -> ErrorReport {
        self.source.report(Some(&self.stage))
    }

    pub fn exit_code(&self) -> i32 {
        self.source.exit_code()
    }
}
