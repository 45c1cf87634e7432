use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::OutputFile;
use crate::io;

/// An output directory owned by one run for its lifetime.
#[derive(Debug)]
pub struct RunDir {
    pub path: PathBuf,
    lock: PathBuf,
}

impl RunDir {
    /// Creates the directory if needed and takes its lock file.
    pub fn acquire(path: &Path) -> Result<Self> {
        io::ensure_dir(path)?;
        let lock = path.join(".lock");
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    Error::Config(format!(
                        "{} is locked by another run (remove {} if that run is dead)",
                        path.display(),
                        lock.display()
                    ))
                } else {
                    Error::io(&lock, e)
                }
            })?;
        Ok(Self {
            path: path.to_path_buf(),
            lock,
        })
    }

    pub fn join(&self, rel: &str) -> PathBuf {
        self.path.join(rel)
    }

    /// Writes `config.json`; called before any computation.
    pub fn snapshot<C: Serialize>(&self, config: &C) -> Result<String> {
        io::write_json(&self.join("config.json"), config)?;
        io::config_hash(config)
    }

    /// Hashes a file already written under the run directory.
    pub fn output(&self, rel: &str) -> Result<OutputFile> {
        Ok(OutputFile {
            path: rel.to_string(),
            sha256: io::sha256_hex(&io::read_bytes(&self.join(rel))?),
        })
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<OutputFile> {
        io::write_json(&self.join(rel), value)?;
        self.output(rel)
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

/// Index of everything a run wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    /// Content hash of the input checkpoint, when there is one.
    pub checkpoint: Option<String>,
    pub outputs: Vec<OutputFile>,
    /// Per analysis: name and files; empty for non-analysis runs.
    pub experiments: Vec<ExperimentOutputs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutputs {
    pub name: String,
    pub files: Vec<OutputFile>,
}
