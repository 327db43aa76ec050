//! Straight-line reference implementations used as test oracles, plus
//! fixture generators. Nothing here calls into the library's numeric paths;
//! only the container types are shared.

#![allow(dead_code)]

use papis::{FeatureMap, ImagePatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_map(h: usize, w: usize, seed: u64) -> FeatureMap {
    let mut r = rng(seed);
    FeatureMap::from_fn(h, w, |_, _| r.random())
}

pub fn random_image(h: usize, w: usize, c: usize, seed: u64) -> ImagePatch {
    let mut r = rng(seed);
    ImagePatch::from_fn(h, w, c, |_, _, _| r.random()).unwrap()
}

/// Smooth blobby tissue-like RGB texture, deterministic in `seed`.
pub fn tissue_image(h: usize, w: usize, seed: u64) -> ImagePatch {
    let mut r = rng(seed);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..(h * w / 300).max(4))
        .map(|_| {
            (
                r.random_range(0.0..h as f64),
                r.random_range(0.0..w as f64),
                r.random_range(1.5..5.0),
                r.random_range(0.2..0.5),
            )
        })
        .collect();
    let mut dark = vec![0.0f64; h * w];
    for &(cy, cx, rad, depth) in &blobs {
        let reach = (3.0 * rad) as isize;
        let (iy, ix) = (cy as isize, cx as isize);
        for y in (iy - reach).max(0)..(iy + reach + 1).min(h as isize) {
            for x in (ix - reach).max(0)..(ix + reach + 1).min(w as isize) {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                dark[y as usize * w + x as usize] += depth * (-d2 / (2.0 * rad * rad)).exp();
            }
        }
    }
    ImagePatch::from_fn(h, w, 3, |y, x, c| {
        let d = dark[y * w + x].min(0.7);
        let base = [0.85, 0.65, 0.80][c];
        let tint = [0.35, 0.55, 0.25][c];
        (base - tint * d - 0.05 * ((x as f64 * 0.11 + y as f64 * 0.07).sin() + 1.0) * 0.5) as f32
    })
    .unwrap()
}

/// Adds clamped Gaussian noise.
pub fn add_noise(img: &ImagePatch, sd: f64, seed: u64) -> ImagePatch {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, sd).unwrap();
    let (h, w, c) = img.dims();
    ImagePatch::from_fn(h, w, c, |y, x, ch| {
        (img.get(y, x, ch) as f64 + normal.sample(&mut r)) as f32
    })
    .unwrap()
}

/// Mirror-about-edge index computed by repeated folding.
pub fn oracle_reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

pub fn gauss_1d(sigma: f64, radius: usize) -> Vec<f64> {
    let w: Vec<f64> = (-(radius as isize)..=radius as isize)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Brute-force 2-D convolution with the full `(2r+1)^2` Gaussian.
pub fn dense_blur(map: &FeatureMap, sigma: f64) -> FeatureMap {
    let r = (3.0 * sigma).ceil() as isize;
    let (h, w) = map.dims();
    let mut kernel = vec![vec![0.0; (2 * r + 1) as usize]; (2 * r + 1) as usize];
    let mut total = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let v = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            kernel[(dy + r) as usize][(dx + r) as usize] = v;
            total += v;
        }
    }
    FeatureMap::from_fn(h, w, |y, x| {
        let mut acc = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                let sy = oracle_reflect(y as isize + dy, h);
                let sx = oracle_reflect(x as isize + dx, w);
                acc += kernel[(dy + r) as usize][(dx + r) as usize] / total * map.get(sy, sx);
            }
        }
        acc
    })
}

/// Per-pixel separable blur, written pixel by pixel.
pub fn naive_separable_blur(map: &FeatureMap, sigma: f64) -> FeatureMap {
    let r = (3.0 * sigma).ceil() as usize;
    let k = gauss_1d(sigma, r);
    let (h, w) = map.dims();
    let horiz = FeatureMap::from_fn(h, w, |y, x| {
        let mut acc = 0.0;
        for (i, kv) in k.iter().enumerate() {
            acc += kv * map.get(y, oracle_reflect(x as isize + i as isize - r as isize, w));
        }
        acc
    });
    FeatureMap::from_fn(h, w, |y, x| {
        let mut acc = 0.0;
        for (i, kv) in k.iter().enumerate() {
            acc += kv * horiz.get(oracle_reflect(y as isize + i as isize - r as isize, h), x);
        }
        acc
    })
}

/// Align-corners bilinear sample at one output pixel.
pub fn bilinear_at(map: &FeatureMap, oh: usize, ow: usize, y: usize, x: usize) -> f64 {
    let (h, w) = map.dims();
    let sy = if oh > 1 {
        y as f64 * (h - 1) as f64 / (oh - 1) as f64
    } else {
        0.0
    };
    let sx = if ow > 1 {
        x as f64 * (w - 1) as f64 / (ow - 1) as f64
    } else {
        0.0
    };
    let y0 = sy.floor() as usize;
    let x0 = sx.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
    map.get(y0, x0) * (1.0 - fy) * (1.0 - fx)
        + map.get(y0, x1) * (1.0 - fy) * fx
        + map.get(y1, x0) * fy * (1.0 - fx)
        + map.get(y1, x1) * fy * fx
}

pub fn bilinear_oracle(map: &FeatureMap, oh: usize, ow: usize) -> FeatureMap {
    FeatureMap::from_fn(oh, ow, |y, x| bilinear_at(map, oh, ow, y, x))
}

pub fn luma_oracle(img: &ImagePatch) -> FeatureMap {
    FeatureMap::from_fn(img.height(), img.width(), |y, x| {
        if img.channels() == 1 {
            img.get(y, x, 0) as f64
        } else {
            0.299 * img.get(y, x, 0) as f64
                + 0.587 * img.get(y, x, 1) as f64
                + 0.114 * img.get(y, x, 2) as f64
        }
    })
}

/// `(mean ssim, mean cs)` by evaluating every 11x11 window directly.
pub fn ssim_oracle_maps(x: &FeatureMap, y: &FeatureMap) -> (f64, f64) {
    let g = gauss_1d(1.5, 5);
    let (h, w) = x.dims();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (mut s_sum, mut cs_sum, mut n) = (0.0, 0.0, 0usize);
    for top in 0..=h - 11 {
        for left in 0..=w - 11 {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let wt = g[i] * g[j];
                    mx += wt * x.get(top + i, left + j);
                    my += wt * y.get(top + i, left + j);
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let wt = g[i] * g[j];
                    let dx = x.get(top + i, left + j) - mx;
                    let dy = y.get(top + i, left + j) - my;
                    vx += wt * dx * dx;
                    vy += wt * dy * dy;
                    cov += wt * dx * dy;
                }
            }
            let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            let cs = (2.0 * cov + c2) / (vx + vy + c2);
            s_sum += l * cs;
            cs_sum += cs;
            n += 1;
        }
    }
    (s_sum / n as f64, cs_sum / n as f64)
}

pub fn ssim_oracle(a: &ImagePatch, b: &ImagePatch) -> f64 {
    ssim_oracle_maps(&luma_oracle(a), &luma_oracle(b)).0
}

pub fn pool_oracle(m: &FeatureMap) -> FeatureMap {
    FeatureMap::from_fn(m.height() / 2, m.width() / 2, |y, x| {
        (m.get(2 * y, 2 * x)
            + m.get(2 * y, 2 * x + 1)
            + m.get(2 * y + 1, 2 * x)
            + m.get(2 * y + 1, 2 * x + 1))
            / 4.0
    })
}

pub fn ms_ssim_oracle(a: &ImagePatch, b: &ImagePatch) -> f64 {
    let weights = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let mut x = luma_oracle(a);
    let mut y = luma_oracle(b);
    let mut out = 1.0;
    for (s, wt) in weights.iter().enumerate() {
        let (ss, cs) = ssim_oracle_maps(&x, &y);
        let term = if s == 4 { ss } else { cs };
        out *= f64::max(term, 0.0).powf(*wt);
        x = pool_oracle(&x);
        y = pool_oracle(&y);
    }
    out
}

/// Scalar multi-scale Retinex: `(illuminations, reflectances)`.
pub fn retinex_oracle(
    map: &FeatureMap,
    sigmas: &[f64],
    eps: f64,
    blur: fn(&FeatureMap, f64) -> FeatureMap,
) -> (Vec<FeatureMap>, Vec<FeatureMap>) {
    let floored = FeatureMap::from_fn(map.height(), map.width(), |y, x| {
        map.get(y, x).max(eps).min(1.0)
    });
    let mut ls = Vec::new();
    let mut rs = Vec::new();
    for &s in sigmas {
        let b = blur(&floored, s);
        let l = FeatureMap::from_fn(map.height(), map.width(), |y, x| {
            b.get(y, x).max(eps).min(1.0)
        });
        let r = FeatureMap::from_fn(map.height(), map.width(), |y, x| {
            floored.get(y, x).ln() - l.get(y, x).ln()
        });
        ls.push(l);
        rs.push(r);
    }
    (ls, rs)
}

pub fn minmax_oracle(m: &FeatureMap) -> FeatureMap {
    let lo = m.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = m.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    FeatureMap::from_fn(m.height(), m.width(), |y, x| {
        if hi > lo {
            (m.get(y, x) - lo) / (hi - lo)
        } else {
            0.0
        }
    })
}

/// Default four-layer filter bank, written out longhand.
pub fn filter_bank_oracle(img: &ImagePatch) -> Vec<Vec<FeatureMap>> {
    let luma = luma_oracle(img);
    let (h, w) = luma.dims();
    let mut layers = Vec::new();
    for i in 0..4u32 {
        let stride = 1usize << i;
        let sigma = f64::from(1u32 << i);
        let s = naive_separable_blur(&luma, sigma);
        let at = |y: usize, x: usize, dy: isize, dx: isize| {
            s.get(
                oracle_reflect(y as isize + dy, h),
                oracle_reflect(x as isize + dx, w),
            )
        };
        let oh = h.div_ceil(stride);
        let ow = w.div_ceil(stride);
        let smooth = FeatureMap::from_fn(oh, ow, |y, x| s.get(y * stride, x * stride));
        let grad = FeatureMap::from_fn(oh, ow, |y, x| {
            let (y, x) = (y * stride, x * stride);
            let gx = (at(y, x, 0, 1) - at(y, x, 0, -1)) / 2.0;
            let gy = (at(y, x, 1, 0) - at(y, x, -1, 0)) / 2.0;
            (gx * gx + gy * gy).sqrt()
        });
        let lap = FeatureMap::from_fn(oh, ow, |y, x| {
            let (y, x) = (y * stride, x * stride);
            at(y, x, 0, 1) + at(y, x, 0, -1) + at(y, x, 1, 0) + at(y, x, -1, 0)
                - 4.0 * at(y, x, 0, 0)
        });
        layers.push(vec![
            minmax_oracle(&smooth),
            minmax_oracle(&grad),
            minmax_oracle(&lap),
        ]);
    }
    layers
}

/// Per-pixel reconstruction: channel average, bilinear up-sampling, layer average.
pub fn reconstruct_oracle(layers: &[Vec<FeatureMap>], oh: usize, ow: usize) -> FeatureMap {
    FeatureMap::from_fn(oh, ow, |y, x| {
        let mut total = 0.0;
        for maps in layers {
            let (h, w) = maps[0].dims();
            let mean = FeatureMap::from_fn(h, w, |yy, xx| {
                maps.iter().map(|m| m.get(yy, xx)).sum::<f64>() / maps.len() as f64
            });
            total += bilinear_at(&mean, oh, ow, y, x);
        }
        total / layers.len() as f64
    })
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    (mu, var.sqrt())
}

/// One weighted term of the reflectance similarity.
pub fn dhigh_term(rx: &[f64], ry: &[f64], alpha: f64, beta: f64, c1: f64, c2: f64) -> f64 {
    let (mx, sx) = mean_sd(rx);
    let (my, sy) = mean_sd(ry);
    alpha * (2.0 * mx * my + c1) / (mx * mx + my * my + c1)
        + beta * (2.0 * sx * sy + c2) / (sx * sx + sy * sy + c2)
}

/// Full score, composed from the oracles above with uniform weights.
pub fn papis_oracle(
    a: &ImagePatch,
    b: &ImagePatch,
    lambda: f64,
    sigmas: &[f64],
    eps: f64,
    c: f64,
) -> (f64, f64) {
    let fa = filter_bank_oracle(a);
    let fb = filter_bank_oracle(b);
    let n_channels: usize = fa.iter().map(Vec::len).sum();
    let weight = 1.0 / (2 * n_channels) as f64;
    let mut high = 0.0;
    let mut low_sum = 0.0;
    let mut low_n = 0;
    for (la, lb) in fa.iter().zip(&fb) {
        for (ma, mb) in la.iter().zip(lb) {
            let (ila, rla) = retinex_oracle(ma, sigmas, eps, naive_separable_blur);
            let (ilb, rlb) = retinex_oracle(mb, sigmas, eps, naive_separable_blur);
            let pool = |rs: &[FeatureMap]| -> Vec<f64> {
                (0..rs[0].len())
                    .map(|p| rs.iter().map(|r| r.data()[p]).sum::<f64>() / rs.len() as f64)
                    .collect()
            };
            high += dhigh_term(&pool(&rla), &pool(&rlb), weight, weight, c, c);
            for (x, y) in ila.iter().zip(&ilb) {
                let mse = x
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    / x.len() as f64;
                low_sum += mse;
                low_n += 1;
            }
        }
    }
    let low = low_sum / low_n as f64;
    (high - lambda * low, low)
}

pub fn max_abs_diff(a: &FeatureMap, b: &FeatureMap) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
