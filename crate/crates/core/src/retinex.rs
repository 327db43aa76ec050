//! Multi-scale Retinex decomposition of feature maps.
//!
//! Each map `F` is modelled as `F = R * L`. For every Gaussian scale `sigma_i`
//! the illumination is the blurred map and the reflectance is the log-ratio:
//!
//! ```text
//! F'  = clamp(F, eps, 1)
//! L_i = clamp(G(sigma_i) * F', eps, 1)
//! R_i = ln F' - ln L_i
//! ```
//!
//! Clamping keeps the logarithm finite on the exact zeros that min-max
//! normalization produces, so `|R_i| <= ln(1 / eps)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::gaussian_blur;
use crate::image::FeatureMap;

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_SIGMAS: [f64; 3] = [2.0, 8.0, 32.0];

/// Illumination and reflectance of one map at every scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RetinexPair {
    pub illuminations: Vec<FeatureMap>,
    pub reflectances: Vec<FeatureMap>,
    pub sigmas: Vec<f64>,
    pub epsilon: f64,
}

impl RetinexPair {
    pub fn scales(&self) -> usize {
        self.sigmas.len()
    }
}

pub fn validate_params(sigmas: &[f64], epsilon: f64) -> Result<()> {
    if sigmas.is_empty() {
        return Err(Error::arg("at least one Retinex sigma is required"));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::arg(format!(
            "Retinex sigma must be positive, got {s}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::arg(format!(
            "Retinex epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// Decomposes `map` at every scale in `sigmas`.
pub fn msr_decompose(map: &FeatureMap, sigmas: &[f64], epsilon: f64) -> Result<RetinexPair> {
    validate_params(sigmas, epsilon)?;
    let floored = map.map(|v| clamp_log_domain(v, epsilon));
    let per_scale = sigmas
        .par_iter()
        .map(|&sigma| -> Result<(FeatureMap, FeatureMap)> {
            let illum = gaussian_blur(&floored, sigma)?.map(|v| clamp_log_domain(v, epsilon));
            let refl = log_ratio(&floored, &illum)?;
            Ok((illum, refl))
        })
        .collect::<Result<Vec<_>>>()?;
    let (illuminations, reflectances) = per_scale.into_iter().unzip();
    Ok(RetinexPair {
        illuminations,
        reflectances,
        sigmas: sigmas.to_vec(),
        epsilon,
    })
}

/// Pointwise `ln(numer) - ln(denom)`.
pub fn log_ratio(numer: &FeatureMap, denom: &FeatureMap) -> Result<FeatureMap> {
    if numer.dims() != denom.dims() {
        return Err(Error::dim("log-ratio operands differ in size"));
    }
    let data = numer
        .data()
        .iter()
        .zip(denom.data())
        .map(|(n, d)| n.ln() - d.ln())
        .collect();
    FeatureMap::new(numer.height(), numer.width(), data)
}

#[inline]
fn clamp_log_domain(v: f64, epsilon: f64) -> f64 {
    if v.is_nan() {
        epsilon
    } else {
        v.clamp(epsilon, 1.0)
    }
}
