//! Content-addressed stage manifests, staging and quarantine.
//!
//! A stage writes into `<out>/.staging/<stage>/`. On success its outputs
//! are renamed into place and `<out>/manifests/<stage>.json` records the
//! seed, parameters and the SHA-256 of every input and output. A stage
//! whose manifest still matches is skipped. On failure the staging
//! directory moves to `<out>/quarantine/<stage>/` with an `error.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::PipelineError;

pub type Counts = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: u64,
    pub params: serde_json::Value,
    /// Logical input name to content hash.
    pub inputs: BTreeMap<String, String>,
    /// Output name relative to the output directory to content hash.
    pub outputs: BTreeMap<String, String>,
    pub counts: Counts,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::file(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
    }
}

fn hash_file(path: &Path, h: &mut Sha256) -> Result<(), PipelineError> {
    let mut f = fs::File::open(path).map_err(|e| PipelineError::file(path, e))?;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf).map_err(|e| PipelineError::file(path, e))?;
        if n == 0 {
            return Ok(());
        }
        h.update(&buf[..n]);
    }
}

fn hash_dir(root: &Path, dir: &Path, h: &mut Sha256) -> Result<(), PipelineError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| PipelineError::file(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| PipelineError::file(dir, e))?;
    entries.sort();
    for path in entries {
        let rel = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .to_string_lossy()
            .replace('\\', "/");
        if path.is_dir() {
            h.update(b"d:");
            h.update(rel.as_bytes());
            h.update([0]);
            hash_dir(root, &path, h)?;
        } else {
            h.update(b"f:");
            h.update(rel.as_bytes());
            h.update([0]);
            let mut inner = Sha256::new();
            hash_file(&path, &mut inner)?;
            h.update(inner.finalize());
        }
    }
    Ok(())
}

/// Hex SHA-256 of a file, or of a directory's sorted relative paths and
/// file contents.
pub fn content_hash(path: &Path) -> Result<String, PipelineError> {
    let mut h = Sha256::new();
    if path.is_dir() {
        hash_dir(path, path, &mut h)?;
    } else if path.is_file() {
        hash_file(path, &mut h)?;
    } else {
        return Err(PipelineError::Input(format!(
            "{} does not exist",
            path.display()
        )));
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Result of running one stage.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ran(Counts),
    Skipped(Counts),
}

impl Outcome {
    pub fn counts(&self) -> &Counts {
        match self {
            Outcome::Ran(c) | Outcome::Skipped(c) => c,
        }
    }

    pub fn skipped(&self) -> bool {
        matches!(self, Outcome::Skipped(_))
    }
}

/// Where a running stage writes.
#[derive(Debug, Clone)]
pub struct Staging {
    dir: PathBuf,
}

impl Staging {
    /// Staging path of the output named `name`.
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

/// One stage invocation: identity, inputs and declared outputs.
#[derive(Debug, Clone)]
pub struct StageJob {
    pub stage: String,
    pub seed: u64,
    pub params: serde_json::Value,
    /// Logical name and path of every input file or directory.
    pub inputs: Vec<(String, PathBuf)>,
    /// Output names relative to `out_dir`.
    pub outputs: Vec<String>,
    pub out_dir: PathBuf,
}

impl StageJob {
    pub fn new(stage: &str, out_dir: &Path, seed: u64, params: serde_json::Value) -> Self {
        StageJob {
            stage: stage.to_string(),
            seed,
            params,
            inputs: Vec::new(),
            outputs: Vec::new(),
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.push((name.to_string(), path.to_path_buf()));
        self
    }

    pub fn output(mut self, name: &str) -> Self {
        self.outputs.push(name.to_string());
        self
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out_dir
            .join("manifests")
            .join(format!("{}.json", self.stage))
    }

    pub fn staging_dir(&self) -> PathBuf {
        self.out_dir.join(".staging").join(&self.stage)
    }

    pub fn quarantine_dir(&self) -> PathBuf {
        self.out_dir.join("quarantine").join(&self.stage)
    }

    fn input_hashes(&self) -> Result<BTreeMap<String, String>, PipelineError> {
        self.inputs
            .iter()
            .map(|(name, path)| {
                if !path.exists() {
                    return Err(PipelineError::Input(format!(
                        "input {name} ({}) does not exist",
                        path.display()
                    )));
                }
                Ok((name.clone(), content_hash(path)?))
            })
            .collect()
    }

    fn output_hashes(&self) -> Result<BTreeMap<String, String>, PipelineError> {
        self.outputs
            .iter()
            .map(|name| Ok((name.clone(), content_hash(&self.out_dir.join(name))?)))
            .collect()
    }

    fn up_to_date(&self, inputs: &BTreeMap<String, String>) -> Option<Manifest> {
        let m = Manifest::load(&self.manifest_path()).ok()?;
        let same = m.stage == self.stage
            && m.version == env!("CARGO_PKG_VERSION")
            && m.seed == self.seed
            && m.params == self.params
            && &m.inputs == inputs
            && m.outputs
                .keys()
                .eq(self.outputs.iter().collect::<BTreeSet<_>>());
        if !same {
            return None;
        }
        let current = self.output_hashes().ok()?;
        (current == m.outputs).then_some(m)
    }

    /// Runs `body` unless the recorded manifest still matches. `body`
    /// writes every declared output under the staging directory.
    pub fn run<F>(&self, force: bool, body: F) -> Result<Outcome, PipelineError>
    where
        F: FnOnce(&Staging) -> Result<Counts, PipelineError>,
    {
        let inputs = self.input_hashes()?;
        if !force {
            if let Some(m) = self.up_to_date(&inputs) {
                log::info!("{}: skipped (up-to-date)", self.stage);
                return Ok(Outcome::Skipped(m.counts));
            }
        }
        let staging_dir = self.staging_dir();
        if staging_dir.exists() {
            fs::remove_dir_all(&staging_dir).map_err(|e| PipelineError::file(&staging_dir, e))?;
        }
        fs::create_dir_all(&staging_dir).map_err(|e| PipelineError::file(&staging_dir, e))?;
        let staging = Staging {
            dir: staging_dir.clone(),
        };
        let result = body(&staging).and_then(|counts| {
            for name in &self.outputs {
                let p = staging.path(name);
                if !p.exists() {
                    return Err(PipelineError::Schema(format!("stage did not write {name}")));
                }
            }
            Ok(counts)
        });
        match result {
            Ok(counts) => {
                self.commit(&staging)?;
                let manifest = Manifest {
                    stage: self.stage.clone(),
                    version: env!("CARGO_PKG_VERSION").to_string(),
                    seed: self.seed,
                    params: self.params.clone(),
                    inputs,
                    outputs: self.output_hashes()?,
                    counts: counts.clone(),
                };
                let path = self.manifest_path();
                forge_core::io::write_atomic(&path, |w| {
                    serde_json::to_writer_pretty(&mut *w, &manifest)?;
                    std::io::Write::write_all(w, b"\n")
                })?;
                let _ = fs::remove_dir_all(&staging_dir);
                remove_if_empty(&self.out_dir.join(".staging"));
                Ok(Outcome::Ran(counts))
            }
            Err(err) => {
                self.quarantine(&err);
                Err(err)
            }
        }
    }

    fn commit(&self, staging: &Staging) -> Result<(), PipelineError> {
        for name in &self.outputs {
            let from = staging.path(name);
            let to = self.out_dir.join(name);
            if let Some(parent) = to.parent() {
                fs::create_dir_all(parent).map_err(|e| PipelineError::file(parent, e))?;
            }
            if to.is_dir() {
                fs::remove_dir_all(&to).map_err(|e| PipelineError::file(&to, e))?;
            }
            fs::rename(&from, &to).map_err(|e| PipelineError::file(&to, e))?;
        }
        Ok(())
    }

    fn quarantine(&self, err: &PipelineError) {
        let target = self.quarantine_dir();
        let _ = fs::remove_dir_all(&target);
        if let Some(parent) = target.parent() {
            let _ = fs::create_dir_all(parent);
        }
        if fs::rename(self.staging_dir(), &target).is_err() {
            let _ = fs::create_dir_all(&target);
        }
        remove_if_empty(&self.out_dir.join(".staging"));
        let report = err.report(Some(&self.stage));
        if let Ok(body) = serde_json::to_string_pretty(&report) {
            let _ = fs::write(target.join("error.json"), body + "\n");
        }
        log::error!(
            "{}: failed, partial outputs in {}",
            self.stage,
            target.display()
        );
    }
}

fn remove_if_empty(dir: &Path) {
    if fs::read_dir(dir).is_ok_and(|mut d| d.next().is_none()) {
        let _ = fs::remove_dir(dir);
    }
}
