use std::path::PathBuf;

use catloop::textify::{to_system_text, SystemMetadata, SystemText};
use catloop::{parse_cif_bytes, CovalentRadiusTable, ParseOptions};
use rayon::prelude::*;
use serde_json::json;

use super::{digests, expand_cif_paths, print_summary, read_inputs, warn, ErrorRecord, InputFile};
use crate::manifest::RunManifest;
use crate::output::OutputDir;
use crate::{CliError, RunContext};

fn render(ctx: &RunContext, cif: &InputFile, sidecar: &InputFile) -> Result<SystemText, String> {
    let bytes = cif.bytes.as_ref().map_err(|e| e.clone())?;
    let outcome = parse_cif_bytes(bytes, ParseOptions::default());
    let structure = outcome.structure.ok_or_else(|| {
        let first = outcome.defects.iter().find(|d| d.code.is_fatal()).expect("failed parse has a fatal defect");
        format!("does not parse: {} at line {}: {}", first.code, first.line, first.message)
    })?;
    let meta_bytes = sidecar
        .bytes
        .as_ref()
        .map_err(|e| format!("metadata sidecar {}: {e}", sidecar.path.display()))?;
    let meta: SystemMetadata = serde_json::from_slice(meta_bytes)
        .map_err(|e| format!("metadata sidecar {}: {e}", sidecar.path.display()))?;
    let tagged = meta.tag(&structure);
    to_system_text(&tagged, &meta, &CovalentRadiusTable::default(), &ctx.config.textify).map_err(|e| e.to_string())
}

pub fn run(ctx: &RunContext, mut out: OutputDir, paths: &[PathBuf]) -> Result<(), CliError> {
    let cif_paths = expand_cif_paths(paths)?;
    let sidecar_paths: Vec<PathBuf> = cif_paths.iter().map(|p| p.with_extension("json")).collect();
    let cifs = read_inputs(ctx, &cif_paths);
    let sidecars = read_inputs(ctx, &sidecar_paths);
    let results: Vec<Result<SystemText, String>> = ctx.pool.install(|| {
        cifs.par_iter()
            .zip(sidecars.par_iter())
            .map(|(c, s)| render(ctx, c, s))
            .collect()
    });

    let mut lines = String::new();
    let mut errors = Vec::new();
    for (cif, result) in cifs.iter().zip(&results) {
        match result {
            Ok(t) => {
                lines.push_str(&t.joined);
                lines.push('\n');
            }
            Err(error) => {
                warn(&cif.id(), error);
                errors.push(ErrorRecord {
                    id: cif.id(),
                    error: error.clone(),
                });
            }
        }
    }
    let mut inputs = digests(&cifs);
    inputs.extend(digests(&sidecars));
    let manifest = RunManifest::new("textify", json!({ "paths": paths }), &ctx.config, inputs, ctx.seed)?;
    out.write("systems.txt", lines.as_bytes())?;
    out.write_jsonl("errors.jsonl", &errors)?;
    out.finish(manifest)?;

    let rendered = results.len() - errors.len();
    if rendered == 0 {
        return Err(CliError::NoInput("no system could be rendered".into()));
    }
    let table = vec![
        ("systems".to_string(), rendered.to_string()),
        ("errors".to_string(), errors.len().to_string()),
    ];
    print_summary(ctx.format, &table, &json!({ "systems": rendered, "errors": errors.len() }));
    Ok(())
}
