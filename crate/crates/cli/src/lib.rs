//! Batch front end: configuration parsing, command dispatch and artifact
//! writing.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Physics { context: String, source: teleport_sim::Error },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Serialize(String),
}

impl CliError {
    pub fn physics(context: impl Into<String>) -> impl FnOnce(teleport_sim::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Physics { context, source }
    }
}

/// Writes every file to a temporary path inside `dir` first and renames
/// them into place only once all writes have succeeded.
pub fn write_atomically(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(dir))?;
        tmp.write_all(bytes).map_err(io(tmp.path()))?;
        tmp.as_file().sync_all().map_err(io(tmp.path()))?;
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, target) in staged {
        tmp.persist(&target).map_err(|e| CliError::Io { path: target.clone(), source: e.error })?;
        written.push(target);
    }
    Ok(written)
}
