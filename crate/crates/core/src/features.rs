//! Multi-layer feature stacks and the unified reconstruction image.
//!
//! The metric only needs a set of normalized per-layer, per-channel maps; it
//! does not care where they came from. Two sources are supported: a built-in
//! multi-scale derivative filter bank, and activations exported from an
//! external encoder as an `FTS1` file.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{gaussian_blur, reflect_index};
use crate::fts::FeatureTensors;
use crate::image::{bilinear_resize, normalize_channel, to_grayscale, FeatureMap, ImagePatch};

/// Normalized feature maps grouped by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    layers: Vec<Vec<FeatureMap>>,
    source_tag: String,
}

impl FeatureStack {
    /// Builds a stack from raw responses, min-max normalizing every channel.
    pub fn from_raw(layers: Vec<Vec<FeatureMap>>, source_tag: impl Into<String>) -> Result<Self> {
        Self::validate(&layers)?;
        let layers = layers
            .into_iter()
            .map(|maps| maps.iter().map(normalize_channel).collect())
            .collect();
        Ok(Self {
            layers,
            source_tag: source_tag.into(),
        })
    }

    /// Wraps maps that are already normalized. Fails if any sample leaves `[0, 1]`.
    pub fn from_normalized(
        layers: Vec<Vec<FeatureMap>>,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        Self::validate(&layers)?;
        let in_range = layers
            .iter()
            .flatten()
            .all(|m| m.data().iter().all(|v| (0.0..=1.0).contains(v)));
        if !in_range {
            return Err(Error::arg("feature samples must lie in [0, 1]"));
        }
        Ok(Self {
            layers,
            source_tag: source_tag.into(),
        })
    }

    fn validate(layers: &[Vec<FeatureMap>]) -> Result<()> {
        if layers.is_empty() {
            return Err(Error::arg("feature stack has no layers"));
        }
        for (i, maps) in layers.iter().enumerate() {
            let first = maps
                .first()
                .ok_or_else(|| Error::arg(format!("layer {i} has no channels")))?;
            if maps.iter().any(|m| m.dims() != first.dims()) {
                return Err(Error::dim(format!("layer {i} mixes map sizes")));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Vec<FeatureMap>] {
        &self.layers
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    /// Channel count per layer.
    pub fn shape(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| l[0].dims()).collect()
    }
}

/// Derivative responses a filter-bank layer can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    /// Gaussian-smoothed luma.
    Smooth,
    /// Central-difference gradient magnitude of the smoothed luma.
    GradientMagnitude,
    /// Five-point Laplacian of the smoothed luma (Laplacian of Gaussian).
    Laplacian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBankLayer {
    pub stride: usize,
    pub sigma: f64,
    pub responses: Vec<Response>,
}

/// Deterministic stand-in for a learned encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBankSpec {
    pub layers: Vec<FilterBankLayer>,
}

impl Default for FilterBankSpec {
    /// Four layers at strides 1, 2, 4, 8 with `sigma = stride`, each emitting
    /// smoothed luma, gradient magnitude and Laplacian.
    fn default() -> Self {
        let layers = (0..4)
            .map(|i| FilterBankLayer {
                stride: 1 << i,
                sigma: f64::from(1u32 << i),
                responses: vec![
                    Response::Smooth,
                    Response::GradientMagnitude,
                    Response::Laplacian,
                ],
            })
            .collect();
        Self { layers }
    }
}

/// Where a feature stack comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractorSpec {
    FilterBank(FilterBankSpec),
    /// Pre-computed activations for one specific image.
    ExternalFile {
        path: PathBuf,
    },
}

impl Default for ExtractorSpec {
    fn default() -> Self {
        ExtractorSpec::FilterBank(FilterBankSpec::default())
    }
}

impl ExtractorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExtractorSpec::FilterBank(bank) => {
                if bank.layers.is_empty() {
                    return Err(Error::arg("filter bank needs at least one layer"));
                }
                for (i, l) in bank.layers.iter().enumerate() {
                    if l.stride == 0 || !(l.sigma > 0.0) || l.responses.is_empty() {
                        return Err(Error::arg(format!(
                            "filter bank layer {i}: stride and sigma must be positive and responses nonempty"
                        )));
                    }
                }
                Ok(())
            }
            ExtractorSpec::ExternalFile { .. } => Ok(()),
        }
    }
}

/// Produces the normalized multi-layer feature stack for `img`.
pub fn extract_features(img: &ImagePatch, spec: &ExtractorSpec) -> Result<FeatureStack> {
    spec.validate()?;
    match spec {
        ExtractorSpec::FilterBank(bank) => filter_bank(img, bank),
        ExtractorSpec::ExternalFile { path } => {
            let tensors = FeatureTensors::load(path)?;
            stack_from_tensors(
                &tensors,
                img.height(),
                img.width(),
                &path.display().to_string(),
            )
        }
    }
}

fn filter_bank(img: &ImagePatch, bank: &FilterBankSpec) -> Result<FeatureStack> {
    let luma = to_grayscale(img);
    let layers = bank
        .layers
        .par_iter()
        .map(|layer| -> Result<Vec<FeatureMap>> {
            let smooth = gaussian_blur(&luma, layer.sigma)?;
            Ok(layer
                .responses
                .iter()
                .map(|r| {
                    let full = match r {
                        Response::Smooth => smooth.clone(),
                        Response::GradientMagnitude => gradient_magnitude(&smooth),
                        Response::Laplacian => laplacian(&smooth),
                    };
                    full.subsample(layer.stride)
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureStack::from_raw(layers, "filter-bank")
}

fn gradient_magnitude(m: &FeatureMap) -> FeatureMap {
    let (h, w) = m.dims();
    FeatureMap::from_fn(h, w, |y, x| {
        let at = |dy: isize, dx: isize| {
            m.get(
                reflect_index(y as isize + dy, h),
                reflect_index(x as isize + dx, w),
            )
        };
        let gx = 0.5 * (at(0, 1) - at(0, -1));
        let gy = 0.5 * (at(1, 0) - at(-1, 0));
        gx.hypot(gy)
    })
}

fn laplacian(m: &FeatureMap) -> FeatureMap {
    let (h, w) = m.dims();
    FeatureMap::from_fn(h, w, |y, x| {
        let at = |dy: isize, dx: isize| {
            m.get(
                reflect_index(y as isize + dy, h),
                reflect_index(x as isize + dx, w),
            )
        };
        at(0, 1) + at(0, -1) + at(1, 0) + at(-1, 0) - 4.0 * at(0, 0)
    })
}

/// Turns externally computed activations into a normalized stack, checking
/// that every layer is a dyadic downsampling of an `height x width` image.
pub fn stack_from_tensors(
    tensors: &FeatureTensors,
    height: usize,
    width: usize,
    tag: &str,
) -> Result<FeatureStack> {
    if tensors.layers.is_empty() {
        return Err(Error::Format(format!("{tag}: no layers")));
    }
    let mut layers = Vec::with_capacity(tensors.layers.len());
    for (i, t) in tensors.layers.iter().enumerate() {
        if t.channels == 0 || t.height == 0 || t.width == 0 {
            return Err(Error::Format(format!("{tag}: layer {i} is empty")));
        }
        if !is_dyadic_downsampling(height, width, t.height, t.width) {
            return Err(Error::dim(format!(
                "{tag}: layer {i} is {}x{}, not a power-of-two downsampling of {height}x{width}",
                t.height, t.width
            )));
        }
        let maps = (0..t.channels)
            .map(|c| {
                FeatureMap::new(
                    t.height,
                    t.width,
                    t.channel(c).iter().map(|&v| v as f64).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        layers.push(maps);
    }
    FeatureStack::from_raw(layers, format!("fts1:{tag}"))
}

/// True if `(h, w)` equals `(H / 2^k, W / 2^k)` for some `k`, rounding
/// either down or up.
pub fn is_dyadic_downsampling(height: usize, width: usize, h: usize, w: usize) -> bool {
    let fits = |full: usize, part: usize, s: usize| part == full / s || part == full.div_ceil(s);
    let mut s = 1usize;
    while s <= height.max(width) {
        if fits(height, h, s) && fits(width, w, s) {
            return true;
        }
        s *= 2;
    }
    false
}

/// Averages each layer's channels, resamples every layer to `out_h x out_w`
/// and averages across layers.
pub fn reconstruct(stack: &FeatureStack, out_h: usize, out_w: usize) -> Result<FeatureMap> {
    let mut acc = FeatureMap::filled(out_h.max(1), out_w.max(1), 0.0);
    for maps in stack.layers() {
        let mean = channel_mean(maps);
        let up = bilinear_resize(&mean, out_h, out_w)?;
        for (a, v) in acc.data_mut().iter_mut().zip(up.data()) {
            *a += v;
        }
    }
    let n = stack.layers().len() as f64;
    Ok(acc.map(|v| (v / n).clamp(0.0, 1.0)))
}

/// Pixelwise mean of equally sized maps.
pub fn channel_mean(maps: &[FeatureMap]) -> FeatureMap {
    let (h, w) = maps[0].dims();
    let mut acc = vec![0.0f64; h * w];
    for m in maps {
        for (a, v) in acc.iter_mut().zip(m.data()) {
            *a += v;
        }
    }
    let n = maps.len() as f64;
    FeatureMap::new(h, w, acc.into_iter().map(|v| v / n).collect()).expect("same dims")
}
