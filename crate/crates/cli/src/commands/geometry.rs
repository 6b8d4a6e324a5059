use std::path::PathBuf;

use catloop::geometry::{build_neighbor_list, min_pair_distance, volume_per_atom, NeighborRecord};
use catloop::{parse_cif_bytes, CovalentRadiusTable, ParseOptions, Structure};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{digests, expand_cif_paths, print_summary, read_inputs, warn, InputFile};
use crate::manifest::RunManifest;
use crate::output::OutputDir;
use crate::{CliError, RunContext};

#[derive(Serialize)]
#[serde(untagged)]
enum Row {
    Measured {
        id: String,
        sites: usize,
        min_pair_distance: f64,
        volume_per_atom: f64,
        neighbors: Vec<NeighborRecord>,
    },
    Failed {
        id: String,
        error: String,
    },
}

fn measure(f: &InputFile, scale: f64) -> Result<(Structure, f64, Vec<NeighborRecord>), String> {
    let bytes = f.bytes.as_ref().map_err(|e| e.clone())?;
    let outcome = parse_cif_bytes(bytes, ParseOptions::default());
    let Some(s) = outcome.structure else {
        let d = outcome.defects.iter().find(|d| d.code.is_fatal()).expect("failed parse has a fatal defect");
        return Err(format!("does not parse: {} at line {}: {}", d.code, d.line, d.message));
    };
    let dmin = min_pair_distance(&s).map_err(|e| e.to_string())?;
    let nl = build_neighbor_list(&s, &CovalentRadiusTable::default(), scale).map_err(|e| e.to_string())?;
    Ok((s, dmin, nl.records()))
}

pub fn run(ctx: &RunContext, mut out: OutputDir, paths: &[PathBuf]) -> Result<(), CliError> {
    let files = read_inputs(ctx, &expand_cif_paths(paths)?);
    let scale = ctx.config.geometry.bond_scale;
    let rows: Vec<Row> = ctx.pool.install(|| {
        files
            .par_iter()
            .map(|f| match measure(f, scale) {
                Ok((s, dmin, neighbors)) => Row::Measured {
                    id: f.id(),
                    sites: s.len(),
                    min_pair_distance: dmin,
                    volume_per_atom: volume_per_atom(&s),
                    neighbors,
                },
                Err(error) => Row::Failed { id: f.id(), error },
            })
            .collect()
    });
    let mut table = Vec::new();
    for row in &rows {
        match row {
            Row::Measured {
                id,
                min_pair_distance,
                volume_per_atom,
                neighbors,
                ..
            } => table.push((
                id.clone(),
                format!(
                    "d_min {min_pair_distance:.4} Å  V/atom {volume_per_atom:.3} Å³  bonds {}",
                    neighbors.len()
                ),
            )),
            Row::Failed { id, error } => warn(id, error),
        }
    }
    let measured = table.len();
    let manifest = RunManifest::new(
        "geometry",
        json!({ "paths": paths, "bond_scale": scale }),
        &ctx.config,
        digests(&files),
        ctx.seed,
    )?;
    out.write_jsonl("geometry.jsonl", &rows)?;
    out.finish(manifest)?;
    if measured == 0 {
        return Err(CliError::NoInput("no structure could be measured".into()));
    }
    print_summary(ctx.format, &table, &rows);
    Ok(())
}
