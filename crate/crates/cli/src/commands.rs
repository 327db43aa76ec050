use std::io::Write;
use std::path::{Path, PathBuf};

use papis::analysis::{
    heatmap, render_heatmap_with_seed, render_side_by_side, report_value, round_sig9,
    HeatmapMetric, HeatmapOptions, PairReport,
};
use papis::features::channel_mean;
use papis::fts::FeatureTensors;
use papis::image::{save_map_png16, save_png16};
use papis::metrics::{
    ms_ssim, papis_with, psnr, ssim, PapisBreakdown, MS_SSIM_MIN_SIZE, SSIM_WINDOW,
};
use papis::wsi::{build_dataset, DatasetParams, SamplingMode};
use papis::{
    extract_features, load_image, msr_decompose, reconstruct, to_grayscale, ExtractorSpec,
    ImagePatch, MetricConfig,
};
use serde_json::{json, Value};

use crate::args::{Command, ExtractorArg, ModeArg};
use crate::failure::{io_failure, Failure};
use crate::settings::Settings;

pub fn dispatch(s: &Settings, command: Command) -> Result<(), Failure> {
    match command {
        Command::Compare { a, b } => compare(s, &a, &b),
        Command::Batch {
            input,
            ingest,
            categorize,
        } => crate::batch::run(s, &input, ingest.as_deref(), categorize.as_deref()),
        Command::Heatmap {
            a,
            b,
            metrics,
            patch_size,
            scale,
            tissue,
            no_tissue_filter,
        } => {
            let filter = (!no_tissue_filter).then(|| s.tissue_with(&tissue));
            heatmaps(s, &a, &b, &metrics, patch_size as usize, scale, filter)
        }
        Command::Decompose {
            image,
            sigmas,
            epsilon,
        } => decompose(s, &image, sigmas, epsilon),
        Command::Features { image, export_fts } => features(s, &image, export_fts.as_deref()),
        Command::Dataset {
            a,
            b,
            mode,
            patch_size,
            count,
            output_size,
            no_flip,
            tissue,
        } => {
            let params = DatasetParams {
                mode: match mode {
                    ModeArg::Grid => SamplingMode::Grid,
                    ModeArg::Random => SamplingMode::Random,
                },
                patch_size: patch_size as usize,
                count: count as usize,
                output_size: output_size as usize,
                filter: s.tissue_with(&tissue),
                random_flip: !no_flip,
                seed: s.seed,
                ..DatasetParams::default()
            };
            dataset(s, &a, &b, &params)
        }
    }
}

/// Every metric the report format carries that can be computed here.
pub fn score_pair(
    id: &str,
    a: &ImagePatch,
    extractor_a: &ExtractorSpec,
    b: &ImagePatch,
    extractor_b: &ExtractorSpec,
    cfg: &MetricConfig,
) -> papis::Result<(PairReport, PapisBreakdown)> {
    if a.dims() != b.dims() {
        return Err(papis::Error::Dimension(format!(
            "{id}: {:?} vs {:?} (height, width, channels)",
            a.dims(),
            b.dims()
        )));
    }
    let side = a.height().min(a.width());
    let mut report = PairReport::new(id).with("psnr", psnr(a, b)?);
    if side >= SSIM_WINDOW {
        report = report.with("ssim", ssim(a, b)?);
    }
    if side >= MS_SSIM_MIN_SIZE {
        report = report.with("ms_ssim", ms_ssim(a, b)?);
    }
    let breakdown = papis_with(a, extractor_a, b, extractor_b, cfg)?;
    Ok((report.with("papis", breakdown.score), breakdown))
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn rounded(v: f64) -> Value {
    serde_json::Number::from_f64(round_sig9(v))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| io_failure(&path.display().to_string(), e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(&dir.display().to_string(), e))
}

pub fn print(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| io_failure("stdout", e))
}

fn compare(s: &Settings, a: &Path, b: &Path) -> Result<(), Failure> {
    let ex_a = s.extractor_for(a, None);
    let ex_b = s.extractor_for(b, None);
    if matches!(s.extractor, ExtractorArg::Fts1(_)) && ex_a == ex_b && a != b {
        return Err(Failure::argument(
            "both images resolve to the same feature file; give them distinct file stems",
        ));
    }
    let ia = load_image(a)?;
    let ib = load_image(b)?;
    let (report, breakdown) = score_pair(&stem(a), &ia, &ex_a, &ib, &ex_b, &s.metric)?;
    let mut v = report_value(&report);
    v["d_high"] = rounded(breakdown.d_high);
    v["d_low"] = rounded(breakdown.d_low);
    v["seed"] = json!(s.seed);
    let text = pretty(&v);
    if let Some(out) = &s.out {
        ensure_dir(out)?;
        write_file(&out.join("compare.json"), &text)?;
        write_file(&out.join("run.json"), pretty(&s.record("compare")))?;
    }
    print(&text)
}

fn heatmaps(
    s: &Settings,
    a: &Path,
    b: &Path,
    metrics: &[HeatmapMetric],
    patch_size: usize,
    scale: u32,
    tissue: Option<papis::wsi::TissueFilter>,
) -> Result<(), Failure> {
    let out = s.out_dir("heatmap")?;
    if metrics.contains(&HeatmapMetric::Papis) && matches!(s.extractor, ExtractorArg::Fts1(_)) {
        return Err(Failure::argument(
            "--extractor fts1 holds whole-image features and cannot score heatmap patches",
        ));
    }
    let mut unique = Vec::new();
    for m in metrics {
        if !unique.contains(m) {
            unique.push(*m);
        }
    }
    let ia = load_image(a)?;
    let ib = load_image(b)?;
    ensure_dir(out)?;
    let mut grids = Vec::new();
    let mut summary = Vec::new();
    for metric in unique {
        let opts = HeatmapOptions {
            patch_size,
            metric,
            tissue,
            extractor: s.filter_bank(),
            config: s.metric.clone(),
        };
        let grid = heatmap(&ia, &ib, &opts)?;
        let png = out.join(format!("heatmap_{metric}.png"));
        let render = render_heatmap_with_seed(&grid, &png, scale, Some(s.seed))?;
        summary.push(json!({
            "metric": metric.name(),
            "rows": grid.rows,
            "cols": grid.cols,
            "min": render.min.map(rounded),
            "max": render.max.map(rounded),
            "png": png,
            "sidecar": png.with_extension("json"),
        }));
        grids.push(grid);
    }
    let combined = if grids.len() > 1 {
        let path = out.join("heatmap_combined.png");
        render_side_by_side(&grids, &path, scale, scale.clamp(4, 64))?;
        Some(path)
    } else {
        None
    };
    print(&pretty(
        &json!({ "grids": summary, "combined": combined, "seed": s.seed }),
    ))
}

fn decompose(
    s: &Settings,
    image: &Path,
    sigmas: Option<Vec<f64>>,
    epsilon: Option<f64>,
) -> Result<(), Failure> {
    let out = s.out_dir("decompose")?;
    let sigmas = sigmas.unwrap_or_else(|| s.metric.sigmas.clone());
    let epsilon = epsilon.unwrap_or(s.metric.epsilon);
    let gray = to_grayscale(&load_image(image)?);
    let pair = msr_decompose(&gray, &sigmas, epsilon)?;
    ensure_dir(out)?;
    let mut maps = Vec::new();
    for (i, sigma) in sigmas.iter().enumerate() {
        for (component, map) in [
            ("illumination", &pair.illuminations[i]),
            ("reflectance", &pair.reflectances[i]),
        ] {
            let file = format!("{component}_{i}.png");
            let range = save_map_png16(map, out.join(&file))?;
            maps.push(json!({
                "file": file,
                "component": component,
                "scale": i,
                "sigma": sigma,
                "offset": range.offset,
                "span": range.span,
            }));
        }
    }
    let sidecar = json!({
        "source": image,
        "seed": s.seed,
        "sigmas": sigmas,
        "epsilon": epsilon,
        "decode": "value = offset + pixel / 65535 * span",
        "maps": maps,
    });
    write_file(&out.join("decompose.json"), pretty(&sidecar))?;
    print(&pretty(
        &json!({ "written": maps.len() + 1, "sidecar": out.join("decompose.json") }),
    ))
}

fn features(s: &Settings, image: &Path, export: Option<&Path>) -> Result<(), Failure> {
    let out = s.out_dir("features")?;
    let img = load_image(image)?;
    let stack = extract_features(&img, &s.extractor_for(image, None))?;
    ensure_dir(out)?;
    let mut layers = Vec::new();
    for (i, maps) in stack.layers().iter().enumerate() {
        let file = format!("layer_{i}.png");
        let range = save_map_png16(&channel_mean(maps), out.join(&file))?;
        let (height, width) = maps[0].dims();
        layers.push(json!({
            "file": file,
            "channels": maps.len(),
            "height": height,
            "width": width,
            "offset": range.offset,
            "span": range.span,
        }));
    }
    let rec = reconstruct(&stack, img.height(), img.width())?;
    save_png16(
        &ImagePatch::from_planes(&[rec])?,
        out.join("reconstruction.png"),
    )?;
    let exported: Option<PathBuf> = match export {
        Some(path) => {
            FeatureTensors::from_stack(&stack).save(path)?;
            Some(path.to_path_buf())
        }
        None => None,
    };
    let sidecar = json!({
        "source": image,
        "seed": s.seed,
        "extractor": stack.source_tag(),
        "layers": layers,
        "reconstruction": "reconstruction.png",
        "fts1": exported,
    });
    write_file(&out.join("features.json"), pretty(&sidecar))?;
    print(&pretty(
        &json!({ "layers": layers.len(), "sidecar": out.join("features.json") }),
    ))
}

fn dataset(s: &Settings, a: &Path, b: &Path, params: &DatasetParams) -> Result<(), Failure> {
    let out = s.out_dir("dataset")?;
    let ia = load_image(a)?;
    let ib = load_image(b)?;
    let sources = [a.display().to_string(), b.display().to_string()];
    let manifest = build_dataset(&ia, &ib, [&sources[0], &sources[1]], params, out)?;
    print(&pretty(&json!({
        "patches": manifest.entries.len(),
        "manifest": out.join("manifest.json"),
        "seed": manifest.seed,
    })))
}
