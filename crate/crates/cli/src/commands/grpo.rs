use std::path::Path;

use catloop::policy::{grpo_loss, CandidateGroup, GroupMember, GrpoConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{digests, print_summary, read_single, warn, ErrorRecord};
use crate::manifest::RunManifest;
use crate::output::OutputDir;
use crate::{CliError, RunContext};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupRecord {
    prompt_id: String,
    members: Vec<GroupMember>,
}

#[derive(Serialize)]
struct MemberReport {
    #[serde(flatten)]
    member: GroupMember,
    advantage: f64,
    logprob: f64,
    kl: f64,
    loss: f64,
}

#[derive(Serialize)]
struct GroupReport {
    prompt_id: String,
    loss: f64,
    members: Vec<MemberReport>,
}

fn process(line: &str, cfg: &GrpoConfig) -> Result<GroupReport, String> {
    let record: GroupRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let group = CandidateGroup::new(record.prompt_id.clone(), record.members, cfg.epsilon).map_err(|e| e.to_string())?;
    let loss = grpo_loss(&group, cfg).map_err(|e| e.to_string())?;
    let members = group
        .members()
        .iter()
        .enumerate()
        .map(|(k, m)| MemberReport {
            member: m.clone(),
            advantage: loss.advantages[k],
            logprob: loss.logprob[k],
            kl: loss.kl[k],
            loss: loss.per_member[k],
        })
        .collect();
    Ok(GroupReport {
        prompt_id: record.prompt_id,
        loss: loss.total,
        members,
    })
}

pub fn run(
    ctx: &RunContext,
    mut out: OutputDir,
    groups: &Path,
    beta: Option<f64>,
    epsilon: Option<f64>,
) -> Result<(), CliError> {
    let cfg = GrpoConfig {
        beta: beta.unwrap_or(ctx.config.grpo.beta),
        epsilon: epsilon.unwrap_or(ctx.config.grpo.epsilon),
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let input = read_single(groups)?;
    let bytes = input.bytes.as_ref().expect("read_single returns contents");
    let text = String::from_utf8_lossy(bytes);

    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match process(line, &cfg) {
            Ok(r) => reports.push(r),
            Err(error) => {
                let id = format!("{}:{}", groups.display(), n + 1);
                warn(&id, &error);
                errors.push(ErrorRecord { id, error });
            }
        }
    }
    let manifest = RunManifest::new(
        "grpo",
        json!({ "groups": groups, "beta": cfg.beta, "epsilon": cfg.epsilon }),
        &ctx.config,
        digests(std::slice::from_ref(&input)),
        ctx.seed,
    )?;
    out.write_jsonl("grpo.jsonl", &reports)?;
    out.write_jsonl("errors.jsonl", &errors)?;
    out.finish(manifest)?;

    if reports.is_empty() {
        return Err(CliError::NoInput(format!("no valid group in {}", groups.display())));
    }
    let mean = reports.iter().map(|r| r.loss).sum::<f64>() / reports.len() as f64;
    let table = vec![
        ("groups".to_string(), reports.len().to_string()),
        ("errors".to_string(), errors.len().to_string()),
        ("mean loss".to_string(), format!("{mean:.6}")),
    ];
    print_summary(
        ctx.format,
        &table,
        &json!({ "groups": reports.len(), "errors": errors.len(), "mean_loss": mean }),
    );
    Ok(())
}
