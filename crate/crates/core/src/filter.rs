//! Separable Gaussian filtering with reflect padding.

use crate::error::{Error, Result};
use crate::image::FeatureMap;

/// A normalized, symmetric, truncated 1-D Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    taps: Vec<f64>,
}

impl GaussianKernel {
    /// Kernel truncated at `ceil(3 sigma)` taps on either side of the center.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::arg(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self::with_radius(sigma, (3.0 * sigma).ceil() as usize))
    }

    /// Kernel with an explicit half-width (`2 * radius + 1` taps).
    pub fn with_radius(sigma: f64, radius: usize) -> Self {
        let denom = 2.0 * sigma * sigma;
        let mut taps: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-d * d / denom).exp()
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        Self {
            sigma,
            radius,
            taps,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// Maps a possibly out-of-range index onto `0..len` by mirroring about the
/// edge samples without repeating them (`-1 -> 1`, `len -> len - 2`).
/// Indices further out keep folding, so any kernel radius is valid.
#[inline]
pub fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Separable Gaussian blur: horizontal pass, then vertical pass, both with
/// reflect padding. Output has the input's dimensions.
pub fn gaussian_blur(map: &FeatureMap, sigma: f64) -> Result<FeatureMap> {
    let kernel = GaussianKernel::new(sigma)?;
    Ok(convolve_separable(map, &kernel))
}

/// Applies `kernel` along rows then columns.
pub fn convolve_separable(map: &FeatureMap, kernel: &GaussianKernel) -> FeatureMap {
    let (h, w) = map.dims();
    let r = kernel.radius();
    let taps = kernel.taps();

    // Each pass is written as a sequence of shifted axpy updates over
    // contiguous rows so the inner loops vectorize. Taps weight differences
    // from the center sample, so a flat neighbourhood comes back exactly.
    let mut horizontal = vec![0.0f64; h * w];
    let mut padded = vec![0.0f64; w + 2 * r];
    for y in 0..h {
        let row = map.row(y);
        for (i, p) in padded.iter_mut().enumerate() {
            *p = row[reflect_index(i as isize - r as isize, w)];
        }
        let out = &mut horizontal[y * w..(y + 1) * w];
        out.copy_from_slice(row);
        for (k, &t) in taps.iter().enumerate() {
            let src = &padded[k..k + w];
            for ((o, &s), &c) in out.iter_mut().zip(src).zip(row) {
                *o += t * (s - c);
            }
        }
    }

    let mut result = horizontal.clone();
    for y in 0..h {
        let (center, out) = (
            &horizontal[y * w..(y + 1) * w],
            &mut result[y * w..(y + 1) * w],
        );
        for (k, &t) in taps.iter().enumerate() {
            let sy = reflect_index(y as isize + k as isize - r as isize, h);
            let src = &horizontal[sy * w..(sy + 1) * w];
            for ((o, &s), &c) in out.iter_mut().zip(src).zip(center) {
                *o += t * (s - c);
            }
        }
    }
    FeatureMap::new(h, w, result).expect("dimensions preserved")
}
