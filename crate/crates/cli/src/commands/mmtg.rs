use std::path::Path;

use catloop::policy::{mmtg_loss, MmtgConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{digests, print_summary, read_single, warn, ErrorRecord};
use crate::manifest::RunManifest;
use crate::output::OutputDir;
use crate::{CliError, RunContext};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LossPair {
    l_mae: f64,
    l_ce: f64,
}

#[derive(Serialize)]
struct MmtgRecord {
    l_mae: f64,
    l_ce: f64,
    lambda: f64,
    loss: f64,
}

pub fn run(
    ctx: &RunContext,
    mut out: OutputDir,
    input: Option<&Path>,
    pair: Option<(f64, f64)>,
    lambda: Option<f64>,
) -> Result<(), CliError> {
    let cfg = MmtgConfig {
        lambda: lambda.unwrap_or(ctx.config.mmtg.lambda),
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut pairs: Vec<(String, Result<LossPair, String>)> = Vec::new();
    let mut inputs = Vec::new();
    match (input, pair) {
        (_, Some((l_mae, l_ce))) => pairs.push(("arguments".into(), Ok(LossPair { l_mae, l_ce }))),
        (Some(path), None) => {
            let file = read_single(path)?;
            let text = String::from_utf8_lossy(file.bytes.as_ref().expect("read_single returns contents")).into_owned();
            for (n, line) in text.lines().enumerate() {
                if !line.trim().is_empty() {
                    let parsed = serde_json::from_str(line).map_err(|e| e.to_string());
                    pairs.push((format!("{}:{}", path.display(), n + 1), parsed));
                }
            }
            inputs = digests(std::slice::from_ref(&file));
        }
        (None, None) => return Err(CliError::Usage("mmtg needs an input file or --l-mae and --l-ce".into())),
    }

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (id, parsed) in pairs {
        match parsed.and_then(|p| {
            mmtg_loss(p.l_mae, p.l_ce, &cfg)
                .map(|loss| MmtgRecord {
                    l_mae: p.l_mae,
                    l_ce: p.l_ce,
                    lambda: cfg.lambda,
                    loss,
                })
                .map_err(|e| e.to_string())
        }) {
            Ok(r) => records.push(r),
            Err(error) => {
                warn(&id, &error);
                errors.push(ErrorRecord { id, error });
            }
        }
    }
    let manifest = RunManifest::new(
        "mmtg",
        json!({ "input": input, "pair": pair, "lambda": cfg.lambda }),
        &ctx.config,
        inputs,
        ctx.seed,
    )?;
    out.write_jsonl("mmtg.jsonl", &records)?;
    out.write_jsonl("errors.jsonl", &errors)?;
    out.finish(manifest)?;

    if records.is_empty() {
        return Err(CliError::NoInput("no valid loss pair".into()));
    }
    let table: Vec<(String, String)> = records
        .iter()
        .map(|r| (format!("L({}, {})", r.l_mae, r.l_ce), format!("{:.6}", r.loss)))
        .collect();
    print_summary(ctx.format, &table, &records);
    Ok(())
}
