mod data;
mod features;
mod train_eval;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use qclp_core::llm::Transport;
use qclp_core::{EmbeddingMatrix, EmbeddingSource};

use crate::cli::{Cli, Command};
use crate::manifest::{self, Manifest};
use crate::usage;

pub use data::{ingest, split};
pub use features::{featurize, merge};
pub use train_eval::{report, train_eval};

pub fn run(cli: &Cli, transport: Arc<dyn Transport>) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Split(a) => split(a, cli.seed),
        Command::Featurize(a) => featurize(a, cli.seed, transport),
        Command::Merge(a) => merge(a, transport),
        Command::TrainEval(a) => train_eval(a),
        Command::Report(a) => report(&a.run, a.out.as_deref().unwrap_or(&a.run)),
    }
}

fn require_file(path: &Path, flag: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{flag}: no such file: {}", path.display())))
    }
}

fn require_dir(path: &Path, flag: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(usage(format!("{flag}: no such directory: {}", path.display())))
    }
}

fn required<'a, T>(value: &'a Option<T>, flag: &str, why: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| usage(format!("{flag} is required {why}")))
}

/// Directory holding the manifest for a single-file artifact, and its name.
fn file_parts(out: &Path) -> Result<(PathBuf, String)> {
    let name = out
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| usage(format!("--out must name a file: {}", out.display())))?
        .to_string();
    let dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok((dir, name))
}

fn write_embedding(m: &EmbeddingMatrix, out: &Path) -> Result<()> {
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    if out.extension().is_some_and(|e| e == "bin") {
        m.write_binary(out)?;
    } else {
        m.write_tsv(out)?;
    }
    Ok(())
}

fn read_embedding(path: &Path, source: EmbeddingSource) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::read_any(path, source).with_context(|| format!("reading features {}", path.display()))
}

/// Returns the manifest when `key` is stale; `None` means the recorded
/// artifacts are current and the command can stop.
fn check_fresh(dir: &Path, key: &str, hash: &str) -> Result<Option<Manifest>> {
    let m = Manifest::load(dir)?;
    if m.is_fresh(dir, key, hash) {
        log::info!(
            "{key}: inputs and config unchanged, reusing artifacts in {}",
            dir.display()
        );
        return Ok(None);
    }
    Ok(Some(m))
}

fn hash_with_inputs(config: serde_json::Value, inputs: &std::collections::BTreeMap<String, String>) -> String {
    manifest::config_hash(&serde_json::json!({ "config": config, "inputs": inputs }))
}
