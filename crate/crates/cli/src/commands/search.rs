use std::path::{Path, PathBuf};

use catloop::search::{run_search, EnergyPredictor, MutationGenerator, ScoringContext, SearchConfig};
use catloop::{parse_cif_bytes, CompositionVector, ParseOptions, Structure};
use serde_json::json;

use super::{print_summary, read_single, InputFile};
use crate::manifest::{InputDigest, RunManifest};
use crate::output::{OutputDir, Tagged};
use crate::{CliError, RunContext};

fn load_structure(path: &Path) -> Result<(Structure, InputFile), CliError> {
    let file = read_single(path)?;
    let outcome = parse_cif_bytes(file.bytes.as_ref().expect("read_single returns contents"), ParseOptions::default());
    match outcome.structure {
        Some(s) => Ok((s, file)),
        None => {
            let d = outcome.defects.iter().find(|d| d.code.is_fatal()).expect("failed parse has a fatal defect");
            Err(CliError::Usage(format!(
                "{} does not parse: {} at line {}: {}",
                path.display(),
                d.code,
                d.line,
                d.message
            )))
        }
    }
}

fn digest(f: &InputFile) -> InputDigest {
    InputDigest::of(&f.path, f.bytes.as_ref().expect("read_single returns contents"))
}

pub fn run(
    ctx: &RunContext,
    mut out: OutputDir,
    template: Option<&Path>,
    target_structure: Option<&Path>,
    target_energy: Option<f64>,
) -> Result<(), CliError> {
    let files = &ctx.config.search_files;
    let template_path: PathBuf = template
        .map(Path::to_path_buf)
        .or_else(|| files.template.as_deref().map(|p| ctx.config_path(p)))
        .ok_or_else(|| CliError::Usage("search needs a template CIF (--template or search_files.template)".into()))?;
    let target_path: Option<PathBuf> = match (target_structure, target_energy) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(_)) => None,
        (None, None) => files.target_structure.as_deref().map(|p| ctx.config_path(p)),
    };

    let predictor = &ctx.config.surrogate;
    let (template, template_file) = load_structure(&template_path)?;
    let mut inputs = vec![digest(&template_file)];
    let mut cfg = SearchConfig {
        seed: ctx.seed,
        ..ctx.config.search.clone()
    };
    if let Some(e) = target_energy {
        cfg.target_energy = e;
    }
    if let Some(path) = &target_path {
        let (known, file) = load_structure(path)?;
        inputs.push(digest(&file));
        cfg.target_energy = predictor
            .predict(&known)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let target = match &files.target_composition {
        Some(f) => CompositionVector::parse_formula(f).map_err(|e| CliError::Usage(e.to_string()))?,
        None => template.composition(),
    };
    let mut gen = MutationGenerator::new(template);
    if let Some(j) = files.coord_jitter {
        gen.coord_jitter = j;
    }
    if let Some(j) = files.lattice_jitter {
        gen.lattice_jitter = j;
    }
    let scoring = ScoringContext {
        target,
        weights: ctx.config.reward,
        phys: ctx.config.phys,
        radii: predictor.radii.clone(),
    };

    let manifest = RunManifest::new(
        "search",
        json!({
            "template": template_path,
            "target_structure": target_path,
            "target_energy": cfg.target_energy,
        }),
        &ctx.config,
        inputs,
        cfg.seed,
    )?;
    let (report, logs) = run_search(&cfg, &gen, predictor, &scoring).map_err(|e| match e {
        catloop::search::SearchError::InitFailure { .. } => CliError::NoInput(e.to_string()),
        other => CliError::Usage(other.to_string()),
    })?;
    out.write_json(
        "report.json",
        &Tagged {
            manifest_id: &manifest.manifest_id,
            body: &report,
        },
    )?;
    out.write_jsonl("iterations.jsonl", &logs)?;
    out.write("best.cif", report.best_cif.as_bytes())?;
    out.finish(manifest)?;

    let mut table = vec![("target energy (eV)".to_string(), format!("{:.6}", cfg.target_energy))];
    for it in std::iter::once(&report.initial).chain(&report.per_iteration) {
        table.push((
            format!("iteration {:>2}", it.iteration),
            format!(
                "best |dE| {:.4}  running {:.4}  pool [{:.4}, {:.4}]  replaced {}",
                it.best_abs_delta_e, it.running_best_abs_delta_e, it.pool_min, it.pool_max, it.replacements
            ),
        ));
    }
    table.push(("success".to_string(), report.success.to_string()));
    print_summary(
        ctx.format,
        &table,
        &json!({
            "success": report.success,
            "best_abs_delta_e": report.best_abs_delta_e,
            "best_energy": report.best_energy,
        }),
    );
    Ok(())
}
