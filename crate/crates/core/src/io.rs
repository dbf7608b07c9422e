//! Line-oriented readers and writers for corpus files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::model::CaptionRecord;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl IoError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Records read and skipped while loading a file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub skipped: usize,
    /// The first few skip reasons.
    pub errors: Vec<String>,
}

impl LoadReport {
    const KEEP_ERRORS: usize = 20;

    pub fn skip(&mut self, reason: impl ToString) {
        self.skipped += 1;
        if self.errors.len() < Self::KEEP_ERRORS {
            self.errors.push(reason.to_string());
        }
    }

    pub fn merge(&mut self, other: LoadReport) {
        self.loaded += other.loaded;
        self.skipped += other.skipped;
        for e in other.errors {
            if self.errors.len() < Self::KEEP_ERRORS {
                self.errors.push(e);
            }
        }
    }
}

/// Non-empty lines with their 1-based line numbers.
pub fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IoError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Reads a JSONL file, skipping malformed lines into the report.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, LoadReport), IoError> {
    let mut report = LoadReport::default();
    let mut out = Vec::new();
    for (n, line) in read_lines(path)? {
        match serde_json::from_str(&line) {
            Ok(v) => {
                out.push(v);
                report.loaded += 1;
            }
            Err(e) => report.skip(format!("{}:{n}: {e}", path.display())),
        }
    }
    Ok((out, report))
}

/// Reads a JSONL file, failing on the first malformed line.
pub fn read_jsonl_strict<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            serde_json::from_str(&line).map_err(|e| IoError::Record {
                path: path.to_path_buf(),
                line: n,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Writes to a temporary sibling and renames it over `path` on success.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<(), IoError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write(&mut w)?;
        w.flush()?;
        w.get_ref().sync_all()
    })();
    match result {
        Ok(()) => fs::rename(&tmp, path).map_err(|e| IoError::io(path, e)),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(IoError::io(path, e))
        }
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IoError> {
    write_atomic(path, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, item)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Reads captions from JSONL (`{"caption_id","text"}`) or, for `.tsv`
/// files, two tab-separated columns `id<TAB>text`.
pub fn read_captions(path: &Path) -> Result<(Vec<CaptionRecord>, LoadReport), IoError> {
    let tsv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("tsv"));
    if !tsv {
        return read_jsonl(path);
    }
    let mut report = LoadReport::default();
    let mut out = Vec::new();
    for (n, line) in read_lines(path)? {
        let parsed = line
            .split_once('\t')
            .ok_or_else(|| "expected two tab-separated columns".to_string())
            .and_then(|(id, text)| {
                CaptionRecord::new(id.trim(), text.trim()).map_err(|e| e.to_string())
            });
        match parsed {
            Ok(rec) => {
                out.push(rec);
                report.loaded += 1;
            }
            Err(e) => report.skip(format!("{}:{n}: {e}", path.display())),
        }
    }
    Ok((out, report))
}
