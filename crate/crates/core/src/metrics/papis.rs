//! The pathology-aware similarity score and its loss forms.
//!
//! Both images go through the same pipeline: feature extraction, per-channel
//! multi-scale Retinex, then two comparisons:
//!
//! * `d_high` compares the mean and standard deviation of every channel's
//!   reflectance (averaged over Retinex scales) with SSIM-style ratios,
//!   weighted by `alpha[i][j]` and `beta[i][j]`;
//! * `d_low` is the mean squared error between illumination maps, averaged
//!   over layers, channels and scales.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{MetricConfig, ScoreConvention, WeightTable};
use crate::error::{Error, Result};
use crate::features::{extract_features, ExtractorSpec, FeatureStack};
use crate::image::{FeatureMap, ImagePatch};
use crate::retinex::msr_decompose;

/// Maps indexed `[layer][channel][scale]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleStack {
    layers: Vec<Vec<Vec<FeatureMap>>>,
}

impl ScaleStack {
    pub fn new(layers: Vec<Vec<Vec<FeatureMap>>>) -> Result<Self> {
        if layers.is_empty() || layers.iter().any(|l| l.is_empty()) {
            return Err(Error::arg("scale stack needs nonempty layers"));
        }
        if layers.iter().flatten().any(|scales| scales.is_empty()) {
            return Err(Error::arg("every channel needs at least one scale"));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Vec<Vec<FeatureMap>>] {
        &self.layers
    }

    /// Channel count per layer.
    pub fn shape(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    fn check_congruent(&self, other: &ScaleStack) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!(
                "layer/channel shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        for (i, (la, lb)) in self.layers.iter().zip(&other.layers).enumerate() {
            for (j, (ca, cb)) in la.iter().zip(lb).enumerate() {
                if ca.len() != cb.len() {
                    return Err(Error::dim(format!(
                        "layer {i} channel {j}: {} vs {} scales",
                        ca.len(),
                        cb.len()
                    )));
                }
                if ca.iter().zip(cb).any(|(a, b)| a.dims() != b.dims()) {
                    return Err(Error::dim(format!(
                        "layer {i} channel {j}: map sizes differ"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Illumination and reflectance stacks of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub illumination: ScaleStack,
    pub reflectance: ScaleStack,
}

/// Runs multi-scale Retinex on every channel of `stack`.
pub fn decompose_stack(
    stack: &FeatureStack,
    sigmas: &[f64],
    epsilon: f64,
) -> Result<Decomposition> {
    let mut illum = Vec::with_capacity(stack.layers().len());
    let mut refl = Vec::with_capacity(stack.layers().len());
    for maps in stack.layers() {
        let pairs = maps
            .par_iter()
            .map(|m| msr_decompose(m, sigmas, epsilon))
            .collect::<Result<Vec<_>>>()?;
        let (l, r): (Vec<_>, Vec<_>) = pairs
            .into_iter()
            .map(|p| (p.illuminations, p.reflectances))
            .unzip();
        illum.push(l);
        refl.push(r);
    }
    Ok(Decomposition {
        illumination: ScaleStack::new(illum)?,
        reflectance: ScaleStack::new(refl)?,
    })
}

/// Population mean and standard deviation of one map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mu: f64,
    pub sd: f64,
}

impl ChannelStats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mu = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        Self { mu, sd: var.sqrt() }
    }
}

/// Pixelwise mean over a channel's Retinex scales.
pub fn pool_scales(scales: &[FeatureMap]) -> FeatureMap {
    crate::features::channel_mean(scales)
}

#[inline]
fn similarity_ratio(a: f64, b: f64, c: f64) -> f64 {
    (2.0 * a * b + c) / (a * a + b * b + c)
}

/// Weighted mean/deviation similarity of scale-pooled reflectances.
pub fn d_high(
    rx: &ScaleStack,
    ry: &ScaleStack,
    weights: &WeightTable,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    rx.check_congruent(ry)?;
    if weights.shape() != rx.shape() || weights.beta.iter().map(Vec::len).ne(rx.shape()) {
        return Err(Error::dim(format!(
            "weight table shape {:?} does not match reflectance shape {:?}",
            weights.shape(),
            rx.shape()
        )));
    }
    let pairs: Vec<(&Vec<FeatureMap>, &Vec<FeatureMap>)> = rx
        .layers
        .iter()
        .zip(&ry.layers)
        .flat_map(|(a, b)| a.iter().zip(b))
        .collect();
    let stats: Vec<(ChannelStats, ChannelStats)> = pairs
        .par_iter()
        .map(|(a, b)| {
            (
                ChannelStats::of(pool_scales(a).data()),
                ChannelStats::of(pool_scales(b).data()),
            )
        })
        .collect();

    // Fixed (layer, channel) order keeps the sum independent of scheduling.
    let alphas = weights.alpha.iter().flatten();
    let betas = weights.beta.iter().flatten();
    let mut total = 0.0;
    for (((sx, sy), alpha), beta) in stats.iter().zip(alphas).zip(betas) {
        total +=
            alpha * similarity_ratio(sx.mu, sy.mu, c1) + beta * similarity_ratio(sx.sd, sy.sd, c2);
    }
    Ok(total)
}

/// Mean over all illumination maps of the per-pixel mean squared error.
pub fn d_low(lx: &ScaleStack, ly: &ScaleStack) -> Result<f64> {
    lx.check_congruent(ly)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (la, lb) in lx.layers.iter().zip(&ly.layers) {
        for (ca, cb) in la.iter().zip(lb) {
            for (a, b) in ca.iter().zip(cb) {
                sum += mse(a.data(), b.data());
                count += 1;
            }
        }
    }
    Ok(sum / count as f64)
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Both components alongside the combined score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PapisBreakdown {
    pub d_high: f64,
    pub d_low: f64,
    pub score: f64,
}

pub fn combine(d_high: f64, d_low: f64, cfg: &MetricConfig) -> f64 {
    match cfg.score_convention {
        ScoreConvention::Similarity => d_high - cfg.lambda * d_low,
        ScoreConvention::Literal => cfg.lambda * d_low + d_high,
    }
}

/// Scores two already-extracted feature stacks.
pub fn papis_stacks(
    fx: &FeatureStack,
    fy: &FeatureStack,
    cfg: &MetricConfig,
) -> Result<PapisBreakdown> {
    cfg.validate()?;
    if fx.shape() != fy.shape() || fx.layer_dims() != fy.layer_dims() {
        return Err(Error::dim("feature stacks differ in structure"));
    }
    let weights = cfg.weights_for(&fx.shape())?;
    let dx = decompose_stack(fx, &cfg.sigmas, cfg.epsilon)?;
    let dy = decompose_stack(fy, &cfg.sigmas, cfg.epsilon)?;
    let high = d_high(&dx.reflectance, &dy.reflectance, &weights, cfg.c1, cfg.c2)?;
    let low = d_low(&dx.illumination, &dy.illumination)?;
    Ok(PapisBreakdown {
        d_high: high,
        d_low: low,
        score: combine(high, low, cfg),
    })
}

/// Full pipeline with an extractor per image (needed when features come
/// from per-image files).
pub fn papis_with(
    x: &ImagePatch,
    extractor_x: &ExtractorSpec,
    y: &ImagePatch,
    extractor_y: &ExtractorSpec,
    cfg: &MetricConfig,
) -> Result<PapisBreakdown> {
    if x.dims() != y.dims() {
        return Err(Error::dim(format!("{:?} vs {:?}", x.dims(), y.dims())));
    }
    cfg.validate()?;
    let fx = extract_features(x, extractor_x)?;
    let fy = extract_features(y, extractor_y)?;
    papis_stacks(&fx, &fy, cfg)
}

/// Similarity score of `y` against `x`; identical images score 1.
pub fn papis(
    x: &ImagePatch,
    y: &ImagePatch,
    extractor: &ExtractorSpec,
    cfg: &MetricConfig,
) -> Result<f64> {
    Ok(papis_with(x, extractor, y, extractor, cfg)?.score)
}

/// `1 - papis(x, g)`.
pub fn papis_loss(
    x: &ImagePatch,
    g: &ImagePatch,
    extractor: &ExtractorSpec,
    cfg: &MetricConfig,
) -> Result<f64> {
    Ok(loss_from_score(papis(x, g, extractor, cfg)?))
}

#[inline]
pub fn loss_from_score(score: f64) -> f64 {
    1.0 - score
}

/// Coefficients of the cycle-consistent training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub cycle: f64,
    pub papis: f64,
    pub generator: f64,
    pub discriminator: f64,
}

impl Default for LossWeights {
    /// `(2, 1, 1, 1)`, the coefficients used for the reported staining model.
    fn default() -> Self {
        Self {
            cycle: 2.0,
            papis: 1.0,
            generator: 1.0,
            discriminator: 1.0,
        }
    }
}

impl LossWeights {
    /// The default weights with the similarity term doubled.
    pub fn guided() -> Self {
        Self {
            papis: 2.0,
            ..Self::default()
        }
    }
}

/// Weighted sum of the four training loss components.
pub fn total_loss(
    cycle: f64,
    papis_term: f64,
    generator: f64,
    discriminator: f64,
    w: &LossWeights,
) -> f64 {
    w.cycle * cycle
        + w.papis * papis_term
        + w.generator * generator
        + w.discriminator * discriminator
}
