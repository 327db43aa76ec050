//! Patch-grid similarity maps over whole-slide image pairs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::colormap::{MISSING, WARM_COLD};
use crate::error::{Error, Result};
use crate::features::ExtractorSpec;
use crate::image::{image_write_error, ImagePatch};
use crate::metrics::{ms_ssim, papis, psnr, ssim, MetricConfig, MS_SSIM_MIN_SIZE, SSIM_WINDOW};
use crate::wsi::{is_tissue, tile_grid, TissueFilter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapMetric {
    Psnr,
    Ssim,
    MsSsim,
    Papis,
}

impl HeatmapMetric {
    pub fn name(self) -> &'static str {
        match self {
            HeatmapMetric::Psnr => "psnr",
            HeatmapMetric::Ssim => "ssim",
            HeatmapMetric::MsSsim => "ms_ssim",
            HeatmapMetric::Papis => "papis",
        }
    }

    pub fn min_patch(self) -> usize {
        match self {
            HeatmapMetric::Psnr => 1,
            HeatmapMetric::Ssim => SSIM_WINDOW,
            HeatmapMetric::MsSsim => MS_SSIM_MIN_SIZE,
            HeatmapMetric::Papis => 32,
        }
    }
}

impl fmt::Display for HeatmapMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeatmapMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "psnr" => Ok(HeatmapMetric::Psnr),
            "ssim" => Ok(HeatmapMetric::Ssim),
            "ms_ssim" | "msssim" => Ok(HeatmapMetric::MsSsim),
            "papis" => Ok(HeatmapMetric::Papis),
            other => Err(Error::arg(format!("unknown metric `{other}`"))),
        }
    }
}

/// One score per aligned patch; `NaN` marks skipped background patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub metric: HeatmapMetric,
    pub rows: usize,
    pub cols: usize,
    pub patch_size: usize,
    #[serde(serialize_with = "nan_as_null", deserialize_with = "null_as_nan")]
    pub scores: Vec<f64>,
}

/// JSON has no NaN or infinity: NaN cells become `null`, infinite ones the
/// tokens `"inf"` / `"-inf"`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Cell {
    Number(f64),
    Token(String),
    Missing(Option<()>),
}

fn nan_as_null<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|&x| {
        if x.is_nan() {
            Cell::Missing(None)
        } else if x.is_infinite() {
            Cell::Token(if x > 0.0 { "inf" } else { "-inf" }.into())
        } else {
            Cell::Number(x)
        }
    }))
}

fn null_as_nan<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let cells: Vec<Cell> = Vec::deserialize(d)?;
    cells
        .into_iter()
        .map(|c| match c {
            Cell::Number(v) => Ok(v),
            Cell::Missing(_) => Ok(f64::NAN),
            Cell::Token(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad cell `{other}`"))),
            },
        })
        .collect()
}

impl HeatmapGrid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.cols + col]
    }

    /// Smallest and largest finite score, if any.
    pub fn range(&self) -> Option<(f64, f64)> {
        let mut it = self.scores.iter().copied().filter(|v| v.is_finite());
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOptions {
    pub patch_size: usize,
    pub metric: HeatmapMetric,
    /// Patches of `a` failing this filter are left as `NaN`.
    pub tissue: Option<TissueFilter>,
    pub extractor: ExtractorSpec,
    pub config: MetricConfig,
}

/// Scores every aligned, non-overlapping `patch_size` square of two equally
/// sized images. Right and bottom remainders are dropped.
pub fn heatmap(a: &ImagePatch, b: &ImagePatch, opts: &HeatmapOptions) -> Result<HeatmapGrid> {
    if a.dims() != b.dims() {
        return Err(Error::dim(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    if opts.patch_size < opts.metric.min_patch() {
        return Err(Error::arg(format!(
            "patch size {} is below the {} minimum of {}",
            opts.patch_size,
            opts.metric,
            opts.metric.min_patch()
        )));
    }
    let origins = tile_grid(a.width(), a.height(), opts.patch_size);
    let scores = origins
        .par_iter()
        .map(|&(x0, y0)| -> Result<f64> {
            let pa = a.crop(x0, y0, opts.patch_size, opts.patch_size)?;
            if let Some(filter) = &opts.tissue {
                if !is_tissue(&pa, filter) {
                    return Ok(f64::NAN);
                }
            }
            let pb = b.crop(x0, y0, opts.patch_size, opts.patch_size)?;
            match opts.metric {
                HeatmapMetric::Psnr => psnr(&pa, &pb),
                HeatmapMetric::Ssim => ssim(&pa, &pb),
                HeatmapMetric::MsSsim => ms_ssim(&pa, &pb),
                HeatmapMetric::Papis => papis(&pa, &pb, &opts.extractor, &opts.config),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HeatmapGrid {
        metric: opts.metric,
        rows: a.height() / opts.patch_size,
        cols: a.width() / opts.patch_size,
        patch_size: opts.patch_size,
        scores,
    })
}

/// Parameters needed to read colors back as scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    pub metric: HeatmapMetric,
    /// Score mapped to table index 0.
    pub min: Option<f64>,
    /// Score mapped to table index 255.
    pub max: Option<f64>,
    /// Pixels per cell side.
    pub scale: u32,
    pub table: String,
    pub index_rule: String,
    pub missing_color: [u8; 3],
}

/// Table index for `v` under `[min, max] -> [0, 255]`, rounding half away
/// from zero. A degenerate range maps everything to 128; infinities saturate.
pub fn lut_index(v: f64, min: f64, max: f64) -> usize {
    if v == f64::INFINITY {
        return 255;
    }
    if v == f64::NEG_INFINITY {
        return 0;
    }
    if !(max > min) {
        return 128;
    }
    let t = ((v - min) / (max - min)).clamp(0.0, 1.0);
    (t * 255.0).round() as usize
}

/// Colors a grid, one `scale x scale` block per cell.
pub fn heatmap_image(grid: &HeatmapGrid, scale: u32) -> Result<(RgbImage, RenderParams)> {
    if scale == 0 || grid.rows == 0 || grid.cols == 0 {
        return Err(Error::arg(
            "heatmap needs a positive scale and a nonempty grid",
        ));
    }
    let range = grid.range();
    let (lo, hi) = range.unwrap_or((0.0, 0.0));
    let img = RgbImage::from_fn(
        grid.cols as u32 * scale,
        grid.rows as u32 * scale,
        |x, y| {
            let v = grid.get((y / scale) as usize, (x / scale) as usize);
            if v.is_nan() {
                Rgb(MISSING)
            } else {
                Rgb(WARM_COLD[lut_index(v, lo, hi)])
            }
        },
    );
    let params = RenderParams {
        metric: grid.metric,
        min: range.map(|r| r.0),
        max: range.map(|r| r.1),
        scale,
        table: "warm-cold-256".into(),
        index_rule: "index = round_half_away((v - min) / (max - min) * 255); 128 when max == min"
            .into(),
        missing_color: MISSING,
    };
    Ok((img, params))
}

/// Sidecar written next to every rendered heatmap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSidecar {
    pub grid: HeatmapGrid,
    pub render: RenderParams,
    pub seed: Option<u64>,
}

/// Writes `path` (8-bit RGB PNG) and a JSON sidecar with the same stem.
pub fn render_heatmap(
    grid: &HeatmapGrid,
    path: impl AsRef<Path>,
    scale: u32,
) -> Result<RenderParams> {
    render_heatmap_with_seed(grid, path, scale, None)
}

pub fn render_heatmap_with_seed(
    grid: &HeatmapGrid,
    path: impl AsRef<Path>,
    scale: u32,
    seed: Option<u64>,
) -> Result<RenderParams> {
    let path = path.as_ref();
    let (img, params) = heatmap_image(grid, scale)?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_write_error(path, e))?;
    let sidecar = HeatmapSidecar {
        grid: grid.clone(),
        render: params.clone(),
        seed,
    };
    write_json_file(&path.with_extension("json"), &sidecar)?;
    Ok(params)
}

/// Places several rendered grids left to right, separated by `gap` white columns.
pub fn render_side_by_side(
    grids: &[HeatmapGrid],
    path: impl AsRef<Path>,
    scale: u32,
    gap: u32,
) -> Result<()> {
    let path = path.as_ref();
    let images = grids
        .iter()
        .map(|g| heatmap_image(g, scale).map(|(img, _)| img))
        .collect::<Result<Vec<_>>>()?;
    let height = images.iter().map(|i| i.height()).max().unwrap_or(1);
    let width =
        images.iter().map(|i| i.width()).sum::<u32>() + gap * images.len().saturating_sub(1) as u32;
    let mut canvas = RgbImage::from_pixel(width.max(1), height, Rgb([255, 255, 255]));
    let mut x0 = 0;
    for img in &images {
        image::imageops::replace(&mut canvas, img, x0 as i64, 0);
        x0 += img.width() + gap;
    }
    canvas
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_write_error(path, e))
}

pub(crate) fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
