use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retinex::{validate_params, DEFAULT_EPSILON, DEFAULT_SIGMAS};

/// How the score combines the illumination penalty with the reflectance
/// similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreConvention {
    /// `d_high - lambda * d_low`: higher is more similar, `1 - score` is a loss.
    #[default]
    Similarity,
    /// `lambda * d_low + d_high`, the sum taken as written.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Uniform,
    /// Positive weights from ChaCha8 seeded with [`MetricConfig::seed`].
    SeededRandom,
}

/// Per-(layer, channel) weights on the mean and deviation similarity terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl WeightTable {
    pub fn shape(&self) -> Vec<usize> {
        self.alpha.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().flatten().sum::<f64>() + self.beta.iter().flatten().sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape() != self.beta.iter().map(Vec::len).collect::<Vec<_>>() {
            return Err(Error::arg("alpha and beta tables differ in shape"));
        }
        if self
            .alpha
            .iter()
            .chain(&self.beta)
            .flatten()
            .any(|w| !(*w >= 0.0) || !w.is_finite())
        {
            return Err(Error::arg("weights must be finite and nonnegative"));
        }
        let total = self.total();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!("weights must sum to 1, got {total}")));
        }
        Ok(())
    }
}

/// Builds alpha/beta tables for a stack with `shape[i]` channels in layer `i`.
///
/// Seeded-random mode draws all alpha entries in (layer, channel) order, then
/// all beta entries, each from `(0, 1]`, and rescales the lot to sum to 1.
pub fn make_weights(shape: &[usize], mode: WeightMode, seed: u64) -> Result<WeightTable> {
    let n: usize = shape.iter().sum();
    if n == 0 {
        return Err(Error::arg("weight table needs at least one channel"));
    }
    let raw: Vec<f64> = match mode {
        WeightMode::Uniform => vec![1.0; 2 * n],
        WeightMode::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..2 * n).map(|_| 1.0 - rng.random::<f64>()).collect()
        }
    };
    let total: f64 = raw.iter().sum();
    let mut values = raw.into_iter().map(|w| w / total);
    let mut take = || -> Vec<Vec<f64>> {
        shape
            .iter()
            .map(|&c| values.by_ref().take(c).collect())
            .collect()
    };
    let alpha = take();
    let beta = take();
    Ok(WeightTable { alpha, beta })
}

/// Everything the similarity score depends on besides the feature extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    /// Weight of the illumination MSE term.
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
    pub sigmas: Vec<f64>,
    pub epsilon: f64,
    pub weight_mode: WeightMode,
    pub seed: u64,
    pub score_convention: ScoreConvention,
    /// Explicit weights; overrides `weight_mode` when present.
    pub weights: Option<WeightTable>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            c1: 1e-6,
            c2: 1e-6,
            sigmas: DEFAULT_SIGMAS.to_vec(),
            epsilon: DEFAULT_EPSILON,
            weight_mode: WeightMode::Uniform,
            seed: 0,
            score_convention: ScoreConvention::Similarity,
            weights: None,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::arg(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        for (name, c) in [("c1", self.c1), ("c2", self.c2)] {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::arg(format!("{name} must be positive, got {c}")));
            }
        }
        validate_params(&self.sigmas, self.epsilon)?;
        if let Some(w) = &self.weights {
            w.validate()?;
        }
        Ok(())
    }

    /// The weight table to use for a stack of the given shape.
    pub fn weights_for(&self, shape: &[usize]) -> Result<WeightTable> {
        match &self.weights {
            Some(w) if w.shape() == shape => Ok(w.clone()),
            Some(w) => Err(Error::dim(format!(
                "weight table shape {:?} does not match feature shape {shape:?}",
                w.shape()
            ))),
            None => make_weights(shape, self.weight_mode, self.seed),
        }
    }
}
