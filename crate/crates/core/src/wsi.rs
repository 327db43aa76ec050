//! Whole-slide patch extraction: grid tiling, background rejection,
//! synchronized random crops, flip/resize augmentation and paired datasets.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{luma, resize_image, save_png16, ImagePatch};

pub const MODALITY_A: &str = "a";
pub const MODALITY_B: &str = "b";

/// Accepts a patch when enough of it is darker than a luminance cut-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TissueFilter {
    pub luminance_max: f64,
    pub min_foreground_fraction: f64,
}

impl Default for TissueFilter {
    fn default() -> Self {
        Self {
            luminance_max: 0.92,
            min_foreground_fraction: 0.25,
        }
    }
}

impl TissueFilter {
    /// Accepts everything.
    pub fn permissive() -> Self {
        Self {
            luminance_max: 1.0,
            min_foreground_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.luminance_max > 0.0 && self.luminance_max <= 1.0) {
            return Err(Error::arg(format!(
                "luminance_max must lie in (0, 1], got {}",
                self.luminance_max
            )));
        }
        if !(0.0..=1.0).contains(&self.min_foreground_fraction) {
            return Err(Error::arg(format!(
                "min_foreground_fraction must lie in [0, 1], got {}",
                self.min_foreground_fraction
            )));
        }
        Ok(())
    }
}

/// Fraction of pixels whose luma is below `luminance_max`.
pub fn foreground_fraction(patch: &ImagePatch, luminance_max: f64) -> f64 {
    let c = patch.channels();
    let dark = patch
        .data()
        .chunks_exact(c)
        .filter(|p| {
            let y = if c == 1 {
                p[0] as f64
            } else {
                luma(p[0] as f64, p[1] as f64, p[2] as f64)
            };
            y < luminance_max
        })
        .count();
    dark as f64 / (patch.width() * patch.height()) as f64
}

pub fn is_tissue(patch: &ImagePatch, filter: &TissueFilter) -> bool {
    foreground_fraction(patch, filter.luminance_max) >= filter.min_foreground_fraction
}

/// Top-left corners `(x, y)` of the non-overlapping `patch` squares that fit
/// entirely inside a `width x height` image, row by row.
pub fn tile_grid(width: usize, height: usize, patch: usize) -> Vec<(usize, usize)> {
    if patch == 0 {
        return Vec::new();
    }
    let (cols, rows) = (width / patch, height / patch);
    (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c * patch, r * patch)))
        .collect()
}

/// `count` crop origins drawn uniformly from ChaCha8 seeded with `seed`;
/// x is drawn before y for each crop.
pub fn synchronized_crops(
    dims: (usize, usize),
    count: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let (w, h) = dims;
    check_crop_fits(w, h, size)?;
    if count == 0 {
        return Err(Error::arg("crop count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| draw_origin(&mut rng, w, h, size))
        .collect())
}

fn check_crop_fits(w: usize, h: usize, size: usize) -> Result<()> {
    if size == 0 || w < size || h < size {
        return Err(Error::arg(format!(
            "crop size {size} does not fit a {w}x{h} image"
        )));
    }
    Ok(())
}

fn draw_origin(rng: &mut ChaCha8Rng, w: usize, h: usize, size: usize) -> (usize, usize) {
    let x = rng.random_range(0..=w - size);
    let y = rng.random_range(0..=h - size);
    (x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    None,
    Hflip,
    Vflip,
    Hvflip,
}

impl Transform {
    pub const ALL: [Transform; 4] = [
        Transform::None,
        Transform::Hflip,
        Transform::Vflip,
        Transform::Hvflip,
    ];

    fn flips(self) -> (bool, bool) {
        match self {
            Transform::None => (false, false),
            Transform::Hflip => (true, false),
            Transform::Vflip => (false, true),
            Transform::Hvflip => (true, true),
        }
    }
}

/// Optional flip, then bilinear resize to an `output_size` square.
pub fn apply_transform(
    patch: &ImagePatch,
    transform: Transform,
    output_size: usize,
) -> Result<ImagePatch> {
    let (h, w, c) = patch.dims();
    let flipped = match transform.flips() {
        (false, false) => patch.clone(),
        (hflip, vflip) => ImagePatch::from_fn(h, w, c, |y, x, ch| {
            let sx = if hflip { w - 1 - x } else { x };
            let sy = if vflip { h - 1 - y } else { y };
            patch.get(sy, sx, ch)
        })?,
    };
    resize_image(&flipped, output_size, output_size)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Grid,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub patch_id: String,
    pub source_image: String,
    pub origin_x: usize,
    pub origin_y: usize,
    pub size: usize,
    pub transform: Transform,
    pub output_size: usize,
}

/// Geometry of every emitted patch pair. The same entry applies to both
/// modalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchManifest {
    pub seed: u64,
    pub mode: SamplingMode,
    pub modalities: [String; 2],
    pub sources: [String; 2],
    pub filter_params: TissueFilter,
    pub entries: Vec<ManifestEntry>,
}

impl PatchManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })
    }

    /// Location of a patch under a dataset root.
    pub fn patch_path(root: &Path, modality: &str, patch_id: &str) -> PathBuf {
        root.join(modality).join(format!("{patch_id}.png"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub mode: SamplingMode,
    pub patch_size: usize,
    /// Number of accepted pairs wanted in random mode.
    pub count: usize,
    pub output_size: usize,
    pub filter: TissueFilter,
    /// Draw one of the four flip variants per pair.
    pub random_flip: bool,
    pub seed: u64,
    /// Random mode gives up after `max_attempts_factor * count` rejected draws.
    pub max_attempts_factor: usize,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            mode: SamplingMode::Grid,
            patch_size: 1024,
            count: 206,
            output_size: 256,
            filter: TissueFilter::default(),
            random_flip: true,
            seed: 0,
            max_attempts_factor: 50,
        }
    }
}

/// Plans the patch pairs without touching the filesystem.
pub fn plan_dataset(
    a: &ImagePatch,
    b: &ImagePatch,
    params: &DatasetParams,
    source_a: &str,
) -> Result<Vec<ManifestEntry>> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::dim(format!(
            "slides differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    params.filter.validate()?;
    if params.output_size == 0 {
        return Err(Error::arg("output size must be positive"));
    }
    let (w, h, size) = (a.width(), a.height(), params.patch_size);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut entries = Vec::new();
    let mut accept = |x: usize, y: usize, rng: &mut ChaCha8Rng| -> Result<bool> {
        if !is_tissue(&a.crop(x, y, size, size)?, &params.filter) {
            return Ok(false);
        }
        let transform = if params.random_flip {
            Transform::ALL[rng.random_range(0..Transform::ALL.len())]
        } else {
            Transform::None
        };
        entries.push(ManifestEntry {
            patch_id: format!("patch_{:05}", entries.len()),
            source_image: source_a.to_string(),
            origin_x: x,
            origin_y: y,
            size,
            transform,
            output_size: params.output_size,
        });
        Ok(true)
    };
    match params.mode {
        SamplingMode::Grid => {
            if size == 0 {
                return Err(Error::arg("patch size must be positive"));
            }
            for (x, y) in tile_grid(w, h, size) {
                accept(x, y, &mut rng)?;
            }
        }
        SamplingMode::Random => {
            check_crop_fits(w, h, size)?;
            if params.count == 0 {
                return Err(Error::arg("crop count must be at least 1"));
            }
            let max_draws = params
                .count
                .saturating_mul(params.max_attempts_factor.max(1));
            let mut accepted = 0;
            for _ in 0..max_draws {
                if accepted == params.count {
                    break;
                }
                let (x, y) = draw_origin(&mut rng, w, h, size);
                if accept(x, y, &mut rng)? {
                    accepted += 1;
                }
            }
        }
    }
    Ok(entries)
}

/// Extracts synchronized patch pairs from two registered slides and writes
/// `{out}/a/{patch_id}.png`, `{out}/b/{patch_id}.png` and `{out}/manifest.json`.
pub fn build_dataset(
    a: &ImagePatch,
    b: &ImagePatch,
    sources: [&str; 2],
    params: &DatasetParams,
    out: impl AsRef<Path>,
) -> Result<PatchManifest> {
    let out = out.as_ref();
    let entries = plan_dataset(a, b, params, sources[0])?;
    for modality in [MODALITY_A, MODALITY_B] {
        let dir = out.join(modality);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    entries.par_iter().try_for_each(|e| -> Result<()> {
        for (modality, slide) in [(MODALITY_A, a), (MODALITY_B, b)] {
            let patch = slide.crop(e.origin_x, e.origin_y, e.size, e.size)?;
            let patch = apply_transform(&patch, e.transform, e.output_size)?;
            save_png16(
                &patch,
                PatchManifest::patch_path(out, modality, &e.patch_id),
            )?;
        }
        Ok(())
    })?;
    let manifest = PatchManifest {
        seed: params.seed,
        mode: params.mode,
        modalities: [MODALITY_A.into(), MODALITY_B.into()],
        sources: [sources[0].into(), sources[1].into()],
        filter_params: params.filter,
        entries,
    };
    let path = out.join("manifest.json");
    std::fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
