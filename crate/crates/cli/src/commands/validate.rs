use std::path::PathBuf;

use catloop::reward::{corpus_failure_rates, pvcp_outcome, FailureRates, RewardReport};
use catloop::{parse_cif_bytes, CompositionVector, CovalentRadiusTable, ParseOptions};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{digests, expand_cif_paths, print_summary, read_inputs, warn};
use crate::manifest::RunManifest;
use crate::output::{OutputDir, Tagged};
use crate::{CliError, RunContext};

#[derive(Serialize)]
#[serde(untagged)]
enum Row {
    Scored(RewardReport),
    Unreadable { candidate_id: String, error: String },
}

#[derive(Serialize)]
struct RatesFile {
    target: String,
    unreadable: usize,
    #[serde(flatten)]
    rates: Option<FailureRates>,
}

pub fn run(ctx: &RunContext, mut out: OutputDir, paths: &[PathBuf], target: Option<&str>) -> Result<(), CliError> {
    let formula = target
        .map(str::to_string)
        .or_else(|| ctx.config.validate.target.clone())
        .ok_or_else(|| CliError::Usage("validate needs a target composition (--target or validate.target)".into()))?;
    let target = CompositionVector::parse_formula(&formula).map_err(|e| CliError::Usage(e.to_string()))?;
    if target.is_empty() {
        return Err(CliError::Usage("target composition is empty".into()));
    }
    let files = read_inputs(ctx, &expand_cif_paths(paths)?);
    let radii = CovalentRadiusTable::default();
    let cfg = &ctx.config;
    let rows: Vec<Row> = ctx.pool.install(|| {
        files
            .par_iter()
            .map(|f| match &f.bytes {
                Ok(bytes) => {
                    let outcome = parse_cif_bytes(bytes, ParseOptions::default());
                    let breakdown = pvcp_outcome(&outcome, &target, &cfg.reward, &radii, &cfg.phys)
                        .expect("target and config were validated");
                    Row::Scored(RewardReport {
                        candidate_id: f.id(),
                        breakdown,
                    })
                }
                Err(error) => Row::Unreadable {
                    candidate_id: f.id(),
                    error: error.clone(),
                },
            })
            .collect()
    });
    for row in &rows {
        if let Row::Unreadable { candidate_id, error } = row {
            warn(candidate_id, error);
        }
    }
    let scored: Vec<_> = rows
        .iter()
        .filter_map(|r| match r {
            Row::Scored(r) => Some(&r.breakdown),
            Row::Unreadable { .. } => None,
        })
        .collect();
    let unreadable = rows.len() - scored.len();
    let rates = corpus_failure_rates(scored.iter().copied()).ok();

    let manifest = RunManifest::new(
        "validate",
        json!({ "paths": paths, "target": formula }),
        &ctx.config,
        digests(&files),
        ctx.seed,
    )?;
    let body = RatesFile {
        target: target.to_string(),
        unreadable,
        rates,
    };
    out.write_jsonl("reports.jsonl", &rows)?;
    out.write_json(
        "rates.json",
        &Tagged {
            manifest_id: &manifest.manifest_id,
            body: &body,
        },
    )?;
    out.finish(manifest)?;

    let Some(rates) = rates else {
        return Err(CliError::NoInput("none of the CIF files could be read".into()));
    };
    let pct = |x: f64| format!("{x:.3}");
    let table = vec![
        ("files scored".to_string(), rates.corpus_size.to_string()),
        ("unreadable".to_string(), unreadable.to_string()),
        ("PF (%)".to_string(), pct(rates.pf)),
        ("VF (%)".to_string(), pct(rates.vf)),
        ("CM (%)".to_string(), pct(rates.cm)),
        ("PV (%)".to_string(), pct(rates.pv)),
    ];
    print_summary(ctx.format, &table, &body);
    Ok(())
}
