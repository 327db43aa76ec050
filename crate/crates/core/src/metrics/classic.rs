//! PSNR, SSIM and MS-SSIM on `[0, 1]` data.
//!
//! SSIM follows the reference formulation: grayscale input, an 11x11
//! Gaussian window with sigma 1.5, `K1 = 0.01`, `K2 = 0.03`, and the mean
//! taken over the valid (unpadded) region only.

use crate::error::{Error, Result};
use crate::filter::GaussianKernel;
use crate::image::{to_grayscale, FeatureMap, ImagePatch};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Per-scale exponents from the original multi-scale SSIM calibration.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
/// Smallest side that still leaves an 11x11 window at the coarsest scale.
pub const MS_SSIM_MIN_SIZE: usize = SSIM_WINDOW << (MS_SSIM_WEIGHTS.len() - 1);

fn check_same_dims(x: &ImagePatch, y: &ImagePatch) -> Result<()> {
    if x.dims() != y.dims() {
        return Err(Error::dim(format!(
            "{:?} vs {:?} (height, width, channels)",
            x.dims(),
            y.dims()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB for data range 1. Identical inputs give
/// `f64::INFINITY`.
pub fn psnr(x: &ImagePatch, y: &ImagePatch) -> Result<f64> {
    check_same_dims(x, y)?;
    let sum: f64 = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    let mse = sum / x.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Single-scale SSIM on luma.
pub fn ssim(x: &ImagePatch, y: &ImagePatch) -> Result<f64> {
    check_same_dims(x, y)?;
    let (h, w, _) = x.dims();
    if h.min(w) < SSIM_WINDOW {
        return Err(Error::arg(format!(
            "SSIM needs both sides >= {SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    Ok(ssim_maps(&to_grayscale(x), &to_grayscale(y)).ssim)
}

/// Five-scale MS-SSIM on luma with 2x2 average pooling between scales.
pub fn ms_ssim(x: &ImagePatch, y: &ImagePatch) -> Result<f64> {
    check_same_dims(x, y)?;
    let (h, w, _) = x.dims();
    if h.min(w) < MS_SSIM_MIN_SIZE {
        return Err(Error::arg(format!(
            "MS-SSIM needs both sides >= {MS_SSIM_MIN_SIZE}, got {h}x{w}"
        )));
    }
    let mut gx = to_grayscale(x);
    let mut gy = to_grayscale(y);
    let last = MS_SSIM_WEIGHTS.len() - 1;
    let mut score = 1.0;
    for (scale, &weight) in MS_SSIM_WEIGHTS.iter().enumerate() {
        let stats = ssim_maps(&gx, &gy);
        // Negative contrast terms would make the fractional power undefined.
        let term = if scale == last { stats.ssim } else { stats.cs };
        score *= term.max(0.0).powf(weight);
        if scale < last {
            gx = average_pool2(&gx);
            gy = average_pool2(&gy);
        }
    }
    Ok(score)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SsimStats {
    pub ssim: f64,
    pub cs: f64,
}

/// Mean SSIM and mean contrast-structure term over the valid window positions.
pub(crate) fn ssim_maps(x: &FeatureMap, y: &FeatureMap) -> SsimStats {
    let kernel = GaussianKernel::with_radius(SSIM_SIGMA, SSIM_WINDOW / 2);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;

    let xx = x.map(|v| v * v);
    let yy = y.map(|v| v * v);
    let xy = FeatureMap::new(
        x.height(),
        x.width(),
        x.data().iter().zip(y.data()).map(|(a, b)| a * b).collect(),
    )
    .expect("same dims");

    let mu_x = filter_valid(x, kernel.taps());
    let mu_y = filter_valid(y, kernel.taps());
    let e_xx = filter_valid(&xx, kernel.taps());
    let e_yy = filter_valid(&yy, kernel.taps());
    let e_xy = filter_valid(&xy, kernel.taps());

    let n = mu_x.len();
    let (mut ssim_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..n {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let var_x = e_xx[i] - mx * mx;
        let var_y = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        let cs = (2.0 * cov + c2) / (var_x + var_y + c2);
        let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
        ssim_sum += l * cs;
        cs_sum += cs;
    }
    SsimStats {
        ssim: ssim_sum / n as f64,
        cs: cs_sum / n as f64,
    }
}

/// Separable correlation without padding; output shrinks by `taps.len() - 1`
/// in each direction.
fn filter_valid(m: &FeatureMap, taps: &[f64]) -> Vec<f64> {
    let (h, w) = m.dims();
    let k = taps.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut horizontal = vec![0.0; h * ow];
    for y in 0..h {
        let row = m.row(y);
        let out = &mut horizontal[y * ow..(y + 1) * ow];
        for (t, &tap) in taps.iter().enumerate() {
            for (o, &s) in out.iter_mut().zip(&row[t..t + ow]) {
                *o += tap * s;
            }
        }
    }
    let mut result = vec![0.0; oh * ow];
    for y in 0..oh {
        let out = &mut result[y * ow..(y + 1) * ow];
        for (t, &tap) in taps.iter().enumerate() {
            let src = &horizontal[(y + t) * ow..(y + t + 1) * ow];
            for (o, &s) in out.iter_mut().zip(src) {
                *o += tap * s;
            }
        }
    }
    result
}

/// Halves each side (rounding down) by averaging 2x2 blocks.
pub fn average_pool2(m: &FeatureMap) -> FeatureMap {
    let (h, w) = (m.height() / 2, m.width() / 2);
    FeatureMap::from_fn(h.max(1), w.max(1), |y, x| {
        let (y2, x2) = (2 * y, 2 * x);
        0.25 * (m.get(y2, x2) + m.get(y2, x2 + 1) + m.get(y2 + 1, x2) + m.get(y2 + 1, x2 + 1))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_examples() {
        let zero = ImagePatch::filled(4, 4, 3, 0.0).unwrap();
        let one = ImagePatch::filled(4, 4, 3, 1.0).unwrap();
        let half = ImagePatch::filled(4, 4, 3, 0.5).unwrap();
        assert_eq!(psnr(&zero, &zero).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&zero, &one).unwrap(), 0.0);
        assert!((psnr(&zero, &half).unwrap() - 6.020599913279624).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let a = ImagePatch::filled(12, 12, 1, 0.0).unwrap();
        let b = ImagePatch::filled(12, 13, 1, 0.0).unwrap();
        assert!(matches!(psnr(&a, &b), Err(Error::Dimension(_))));
        assert!(matches!(ssim(&a, &b), Err(Error::Dimension(_))));
        let c = ImagePatch::filled(12, 12, 3, 0.0).unwrap();
        assert!(matches!(psnr(&a, &c), Err(Error::Dimension(_))));
    }

    #[test]
    fn too_small_inputs() {
        let a = ImagePatch::filled(10, 40, 1, 0.0).unwrap();
        assert!(matches!(ssim(&a, &a), Err(Error::Argument(_))));
        let b = ImagePatch::filled(175, 400, 1, 0.0).unwrap();
        assert!(matches!(ms_ssim(&b, &b), Err(Error::Argument(_))));
    }

    #[test]
    fn ssim_closed_form() {
        let zero = ImagePatch::filled(16, 16, 1, 0.0).unwrap();
        let one = ImagePatch::filled(16, 16, 1, 1.0).unwrap();
        let c1 = 1e-4;
        assert!((ssim(&zero, &one).unwrap() - c1 / (1.0 + c1)).abs() < 1e-12);
        assert_eq!(ssim(&one, &one).unwrap(), 1.0);
    }

    #[test]
    fn ms_ssim_identity() {
        let img = ImagePatch::from_fn(176, 180, 3, |y, x, c| {
            ((y * 7 + x * 3 + c) % 17) as f32 / 16.0
        })
        .unwrap();
        assert!((ms_ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pooling_floors_odd_sides() {
        let m = FeatureMap::from_fn(5, 4, |y, x| (y * 4 + x) as f64);
        let p = average_pool2(&m);
        assert_eq!(p.dims(), (2, 2));
        assert_eq!(p.get(0, 0), (0.0 + 1.0 + 4.0 + 5.0) / 4.0);
    }
}
