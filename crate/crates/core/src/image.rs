//! Image and feature-map containers, image IO, and the small pointwise
//! transforms (luma, min-max normalization, bilinear resampling) that every
//! other module builds on.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Luma, Rgb};

use crate::error::{Error, Result};

/// An `H x W x C` image with samples in `[0, 1]`.
///
/// Samples are stored row-major with channels interleaved (`RGBRGB...`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImagePatch {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::arg(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::arg(format!(
                "images must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::arg(format!(
                "expected {} samples, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::arg(format!("sample {bad} lies outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image from a per-sample function; results are clamped into `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(clamp_unit(f(y, x, c)));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![clamp_unit(value); height * width * channels],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Copies out the `size x size` square whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > self.width || y0 + height > self.height || width == 0 || height == 0 {
            return Err(Error::arg(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{} image",
                self.width, self.height
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(width * height * c);
        for y in y0..y0 + height {
            let start = (y * self.width + x0) * c;
            data.extend_from_slice(&self.data[start..start + width * c]);
        }
        Ok(Self {
            height,
            width,
            channels: c,
            data,
        })
    }

    /// Splits the image into one [`FeatureMap`] per channel.
    pub fn planes(&self) -> Vec<FeatureMap> {
        (0..self.channels)
            .map(|c| {
                let data = self
                    .data
                    .iter()
                    .skip(c)
                    .step_by(self.channels)
                    .map(|&v| v as f64)
                    .collect();
                FeatureMap {
                    height: self.height,
                    width: self.width,
                    data,
                }
            })
            .collect()
    }

    /// Reassembles an image from per-channel planes, clamping into `[0, 1]`.
    pub fn from_planes(planes: &[FeatureMap]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::arg("no planes supplied"))?;
        let (h, w) = first.dims();
        if planes.iter().any(|p| p.dims() != (h, w)) {
            return Err(Error::dim("planes differ in size"));
        }
        let c = planes.len();
        let mut data = vec![0.0f32; h * w * c];
        for (ci, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.data.iter().enumerate() {
                data[i * c + ci] = clamp_unit(v as f32);
            }
        }
        Self::new(h, w, c, data)
    }
}

#[inline]
fn clamp_unit(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// A single-channel real-valued map, row-major.
///
/// Feature maps carry 64-bit samples: they hold intermediate quantities
/// (blurred responses, log-ratios) whose algebraic identities are checked to
/// 1e-9 and tighter.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::arg(format!(
                "map dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::arg(format!(
                "expected {} samples, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "map dimensions must be positive");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "map dimensions must be positive");
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Smallest and largest sample.
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Keeps every `stride`-th sample in both directions, starting at the origin.
    pub fn subsample(&self, stride: usize) -> Self {
        assert!(stride >= 1);
        if stride == 1 {
            return self.clone();
        }
        let h = self.height.div_ceil(stride);
        let w = self.width.div_ceil(stride);
        Self::from_fn(h, w, |y, x| self.get(y * stride, x * stride))
    }
}

/// Reads an 8- or 16-bit grayscale or RGB PNG/TIFF, scaling samples to `[0, 1]`.
///
/// Alpha channels are dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImagePatch> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    })?;
    from_dynamic(img).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Converts a decoded image into an [`ImagePatch`].
pub fn from_dynamic(img: DynamicImage) -> Result<ImagePatch> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let scale8 = |v: u8| v as f32 / 255.0;
    let scale16 = |v: u16| v as f32 / 65535.0;
    let (channels, data): (usize, Vec<f32>) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw().into_iter().map(scale8).collect()),
        DynamicImage::ImageLumaA8(b) => (
            1,
            b.into_raw().chunks_exact(2).map(|p| scale8(p[0])).collect(),
        ),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw().into_iter().map(scale8).collect()),
        DynamicImage::ImageRgba8(b) => (
            3,
            b.into_raw()
                .chunks_exact(4)
                .flat_map(|p| [scale8(p[0]), scale8(p[1]), scale8(p[2])])
                .collect(),
        ),
        DynamicImage::ImageLuma16(b) => (1, b.into_raw().into_iter().map(scale16).collect()),
        DynamicImage::ImageLumaA16(b) => (
            1,
            b.into_raw()
                .chunks_exact(2)
                .map(|p| scale16(p[0]))
                .collect(),
        ),
        DynamicImage::ImageRgb16(b) => (3, b.into_raw().into_iter().map(scale16).collect()),
        DynamicImage::ImageRgba16(b) => (
            3,
            b.into_raw()
                .chunks_exact(4)
                .flat_map(|p| [scale16(p[0]), scale16(p[1]), scale16(p[2])])
                .collect(),
        ),
        other => {
            return Err(Error::Format(format!(
                "unsupported pixel layout {:?}; expected 8/16-bit gray or RGB",
                other.color()
            )))
        }
    };
    ImagePatch::new(h, w, channels, data)
}

#[inline]
fn quantize16(v: f32) -> u16 {
    (clamp_unit(v) as f64 * 65535.0).round() as u16
}

/// Writes a lossless 16-bit PNG (gray or RGB).
pub fn save_png16(img: &ImagePatch, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width as u32, img.height as u32);
    let raw: Vec<u16> = img.data.iter().map(|&v| quantize16(v)).collect();
    let result = if img.channels == 1 {
        ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw)
            .expect("buffer size matches")
            .save_with_format(path, image::ImageFormat::Png)
    } else {
        ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw)
            .expect("buffer size matches")
            .save_with_format(path, image::ImageFormat::Png)
    };
    result.map_err(|e| image_write_error(path, e))
}

/// Affine mapping used to store a real-valued map in a 16-bit PNG:
/// `value = offset + pixel / 65535 * span`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RangeMapping {
    pub offset: f64,
    pub span: f64,
}

impl RangeMapping {
    pub fn decode(&self, pixel: u16) -> f64 {
        self.offset + pixel as f64 / 65535.0 * self.span
    }
}

/// Writes a feature map as 16-bit grayscale PNG after mapping `[min, max]`
/// onto the full 16-bit range. A flat map writes all-zero pixels with
/// `span = 0`.
pub fn save_map_png16(map: &FeatureMap, path: impl AsRef<Path>) -> Result<RangeMapping> {
    let path = path.as_ref();
    let (lo, hi) = map.min_max();
    let span = hi - lo;
    let raw: Vec<u16> = if span > 0.0 {
        map.data
            .iter()
            .map(|&v| (((v - lo) / span) * 65535.0).round().clamp(0.0, 65535.0) as u16)
            .collect()
    } else {
        vec![0; map.len()]
    };
    ImageBuffer::<Luma<u16>, _>::from_raw(map.width as u32, map.height as u32, raw)
        .expect("buffer size matches")
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_write_error(path, e))?;
    Ok(RangeMapping {
        offset: lo,
        span: span.max(0.0),
    })
}

pub(crate) fn image_write_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

/// ITU-R BT.601 luma; single-channel images pass through unchanged.
pub fn to_grayscale(img: &ImagePatch) -> FeatureMap {
    let data = if img.channels == 1 {
        img.data.iter().map(|&v| v as f64).collect()
    } else {
        img.data
            .chunks_exact(3)
            .map(|p| luma(p[0] as f64, p[1] as f64, p[2] as f64))
            .collect()
    };
    FeatureMap {
        height: img.height,
        width: img.width,
        data,
    }
}

/// BT.601 weights. Summed right-to-left so that white maps to exactly 1.
#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + (0.587 * g + 0.114 * b)
}

/// Min-max normalizes a map into `[0, 1]`. A flat map becomes all zeros.
pub fn normalize_channel(map: &FeatureMap) -> FeatureMap {
    let (lo, hi) = map.min_max();
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        return FeatureMap::filled(map.height, map.width, 0.0);
    }
    map.map(|v| (v - lo) / range)
}

/// Align-corners bilinear resampling.
pub fn bilinear_resize(map: &FeatureMap, out_h: usize, out_w: usize) -> Result<FeatureMap> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::arg(format!(
            "resize target must be positive, got {out_h}x{out_w}"
        )));
    }
    if (out_h, out_w) == map.dims() {
        return Ok(map.clone());
    }
    let ys = sample_positions(map.height, out_h);
    let xs = sample_positions(map.width, out_w);
    let mut data = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, fy) in &ys {
        let top = map.row(y0);
        let bottom = map.row(y1);
        for &(x0, x1, fx) in &xs {
            let upper = (1.0 - fx) * top[x0] + fx * top[x1];
            let lower = (1.0 - fx) * bottom[x0] + fx * bottom[x1];
            data.push((1.0 - fy) * upper + fy * lower);
        }
    }
    FeatureMap::new(out_h, out_w, data)
}

/// For each output coordinate: the two bracketing source indices and the
/// fractional weight of the second.
fn sample_positions(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|i| {
            if dst == 1 || src == 1 {
                return (0, 0, 0.0);
            }
            let pos = i as f64 * (src - 1) as f64 / (dst - 1) as f64;
            let i0 = (pos.floor() as usize).min(src - 1);
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect()
}

/// Resizes every channel of an image with [`bilinear_resize`].
pub fn resize_image(img: &ImagePatch, out_h: usize, out_w: usize) -> Result<ImagePatch> {
    if (out_h, out_w) == (img.height, img.width) {
        return Ok(img.clone());
    }
    let planes = img
        .planes()
        .iter()
        .map(|p| bilinear_resize(p, out_h, out_w))
        .collect::<Result<Vec<_>>>()?;
    ImagePatch::from_planes(&planes)
}
