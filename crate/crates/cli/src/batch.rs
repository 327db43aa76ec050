use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use papis::analysis::{
    categorize_point, default_thresholds, ingest_scores, merge_fragments, write_csv, write_json,
    PairReport,
};
use papis::load_image;
use papis::wsi::{PatchManifest, MODALITY_A, MODALITY_B};
use rayon::prelude::*;
use serde_json::json;

use crate::commands::{ensure_dir, pretty, print, score_pair, write_file};
use crate::failure::{io_failure, Failure, EXIT_INPUT};
use crate::settings::Settings;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "tif", "tiff"];

#[derive(Debug, Clone, PartialEq)]
struct PairSource {
    id: String,
    a: Option<PathBuf>,
    b: Option<PathBuf>,
}

pub fn run(
    s: &Settings,
    input: &Path,
    ingest: Option<&Path>,
    categorize_vs: Option<&str>,
) -> Result<(), Failure> {
    let pairs = discover(input)?;
    let outcomes: Vec<Result<PairReport, Failure>> =
        pairs.par_iter().map(|p| score(s, p)).collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (pair, outcome) in pairs.iter().zip(outcomes) {
        match outcome {
            Ok(r) => reports.push(r),
            Err(f) => failures.push((pair.id.clone(), f)),
        }
    }
    if let Some(path) = ingest {
        merge_fragments(&mut reports, &ingest_scores(path)?)?;
    }
    if let Some(metric) = categorize_vs {
        label(&mut reports, metric)?;
    }

    let mut csv = Vec::new();
    write_csv(&reports, &mut csv)?;
    let failure_list: Vec<_> = failures
        .iter()
        .map(|(id, f)| json!({ "pair_id": id, "kind": f.kind, "code": f.code, "message": f.message }))
        .collect();
    match &s.out {
        Some(out) => {
            ensure_dir(out)?;
            write_file(&out.join("report.csv"), &csv)?;
            write_file(&out.join("report.json"), write_json(&reports)?)?;
            write_file(&out.join("run.json"), pretty(&s.record("batch")))?;
            let errors = out.join("errors.json");
            if failures.is_empty() {
                if errors.exists() {
                    std::fs::remove_file(&errors)
                        .map_err(|e| io_failure(&errors.display().to_string(), e))?;
                }
            } else {
                write_file(&errors, pretty(&failure_list))?;
            }
        }
        None => print(std::str::from_utf8(&csv).expect("csv is utf-8"))?,
    }
    match failures.first() {
        None => Ok(()),
        Some((_, first)) => Err(Failure {
            code: first.code,
            kind: "batch",
            message: format!("{} of {} pairs failed", failures.len(), pairs.len()),
            details: Some(json!(failure_list)),
        }),
    }
}

fn score(s: &Settings, pair: &PairSource) -> Result<PairReport, Failure> {
    let missing = |side: &str| Failure {
        code: EXIT_INPUT,
        kind: "missing",
        message: format!("no counterpart under {side}/"),
        details: None,
    };
    let a = pair.a.as_deref().ok_or_else(|| missing(MODALITY_A))?;
    let b = pair.b.as_deref().ok_or_else(|| missing(MODALITY_B))?;
    let ia = load_image(a)?;
    let ib = load_image(b)?;
    let (report, _) = score_pair(
        &pair.id,
        &ia,
        &s.extractor_for(a, Some(MODALITY_A)),
        &ib,
        &s.extractor_for(b, Some(MODALITY_B)),
        &s.metric,
    )?;
    Ok(report)
}

fn label(reports: &mut [PairReport], metric: &str) -> Result<(), Failure> {
    let point = |r: &PairReport| match (r.score("papis"), r.score(metric)) {
        (Some(p), Some(o)) if !p.is_nan() && !o.is_nan() => Some((p, o)),
        _ => None,
    };
    let points: Vec<_> = reports.iter().filter_map(point).collect();
    if points.len() < 2 {
        return Err(Failure::argument(format!(
            "--categorize needs at least 2 pairs scored by both papis and {metric}, found {}",
            points.len()
        )));
    }
    let t = default_thresholds(&points)?;
    for r in reports.iter_mut() {
        r.category = point(r).map(|(p, o)| categorize_point(p, o, t));
    }
    Ok(())
}

/// Pairs in `pair_id` order. Accepts a manifest file, a dataset directory
/// containing one, or a directory with `a/` and `b/` subdirectories whose
/// images pair by file stem.
fn discover(input: &Path) -> Result<Vec<PairSource>, Failure> {
    if !input.exists() {
        return Err(io_failure(
            &input.display().to_string(),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ));
    }
    let manifest = if input.is_file() {
        Some(input.to_path_buf())
    } else {
        Some(input.join("manifest.json")).filter(|p| p.is_file())
    };
    if let Some(path) = manifest {
        let root = path.parent().unwrap_or(Path::new("."));
        let m = PatchManifest::load(&path)?;
        let mut pairs: Vec<PairSource> = m
            .entries
            .iter()
            .map(|e| PairSource {
                id: e.patch_id.clone(),
                a: Some(PatchManifest::patch_path(root, MODALITY_A, &e.patch_id)),
                b: Some(PatchManifest::patch_path(root, MODALITY_B, &e.patch_id)),
            })
            .collect();
        pairs.sort_by(|x, y| x.id.cmp(&y.id));
        return Ok(pairs);
    }
    let a = list_images(&input.join(MODALITY_A))?;
    let mut b = list_images(&input.join(MODALITY_B))?;
    let mut pairs: BTreeMap<String, PairSource> = a
        .into_iter()
        .map(|(id, path)| {
            let other = b.remove(&id);
            (
                id.clone(),
                PairSource {
                    id,
                    a: Some(path),
                    b: other,
                },
            )
        })
        .collect();
    for (id, path) in b {
        pairs.insert(
            id.clone(),
            PairSource {
                id,
                a: None,
                b: Some(path),
            },
        );
    }
    Ok(pairs.into_values().collect())
}

fn list_images(dir: &Path) -> Result<BTreeMap<String, PathBuf>, Failure> {
    let mut found = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(found);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| io_failure(&dir.display().to_string(), e))?;
    for entry in entries {
        let path = entry
            .map_err(|e| io_failure(&dir.display().to_string(), e))?
            .path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if !is_image || !path.is_file() {
            continue;
        }
        let id = crate::commands::stem(&path);
        if let Some(previous) = found.insert(id.clone(), path.clone()) {
            return Err(Failure::argument(format!(
                "pair id `{id}` is ambiguous: {} and {}",
                previous.display(),
                path.display()
            )));
        }
    }
    Ok(found)
}
