pub mod geometry;
pub mod grpo;
pub mod mmtg;
pub mod search;
pub mod textify;
pub mod validate;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::manifest::InputDigest;
use crate::{CliError, Format, RunContext};

/// One input file and its contents, or the reason it could not be read.
pub(crate) struct InputFile {
    pub path: PathBuf,
    pub bytes: Result<Vec<u8>, String>,
}

impl InputFile {
    pub fn id(&self) -> String {
        self.path.display().to_string()
    }
}

/// Expands directories to their `*.cif` files (sorted by name); other paths
/// are kept as given, in order.
pub(crate) fn expand_cif_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let entries = fs::read_dir(p).map_err(|e| CliError::NoInput(format!("{}: {e}", p.display())))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x.eq_ignore_ascii_case("cif")))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(CliError::NoInput("no CIF files found".into()));
    }
    Ok(out)
}

pub(crate) fn read_inputs(ctx: &RunContext, paths: &[PathBuf]) -> Vec<InputFile> {
    ctx.pool.install(|| {
        paths
            .par_iter()
            .map(|p| InputFile {
                path: p.clone(),
                bytes: fs::read(p).map_err(|e| e.to_string()),
            })
            .collect()
    })
}

pub(crate) fn digests(inputs: &[InputFile]) -> Vec<InputDigest> {
    inputs
        .iter()
        .filter_map(|f| f.bytes.as_ref().ok().map(|b| InputDigest::of(&f.path, b)))
        .collect()
}

pub(crate) fn read_single(path: &Path) -> Result<InputFile, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::NoInput(format!("{}: {e}", path.display())))?;
    Ok(InputFile {
        path: path.to_path_buf(),
        bytes: Ok(bytes),
    })
}

/// Per-input failure record written alongside successful results.
#[derive(Debug, Clone, Serialize)]
pub(crate) struct ErrorRecord {
    pub id: String,
    pub error: String,
}

pub(crate) fn warn(id: &str, error: &str) {
    eprintln!("warning: {id}: {error}");
}

/// Prints `rows` as aligned `key  value` lines, or `json` compactly.
pub(crate) fn print_summary<T: Serialize>(format: Format, rows: &[(String, String)], json: &T) {
    match format {
        Format::Json => println!("{}", serde_json::to_string(json).expect("summary serializes")),
        Format::Table => {
            let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, v) in rows {
                println!("{k:<width$}  {v}");
            }
        }
    }
}
