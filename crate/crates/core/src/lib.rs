//! Pathology-aware perceptual image similarity.
//!
//! The score compares two images through normalized multi-layer feature
//! maps. Each feature channel is split by multi-scale Retinex into a smooth
//! illumination part and a log-ratio reflectance part; reflectance statistics
//! are compared SSIM-style and illumination by mean squared error.
//!
//! ```no_run
//! use papis::{load_image, metrics, ExtractorSpec, MetricConfig};
//!
//! let reference = load_image("reference.png")?;
//! let generated = load_image("generated.png")?;
//! let score = metrics::papis(&reference, &generated, &ExtractorSpec::default(), &MetricConfig::default())?;
//! println!("{score:.6}");
//! # Ok::<(), papis::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod analysis;
mod error;
pub mod features;
pub mod filter;
pub mod fts;
pub mod image;
pub mod metrics;
pub mod retinex;
pub mod wsi;

pub use error::{Error, Result};
pub use features::{extract_features, reconstruct, ExtractorSpec, FeatureStack, FilterBankSpec};
pub use filter::{gaussian_blur, GaussianKernel};
pub use image::{
    bilinear_resize, load_image, normalize_channel, to_grayscale, FeatureMap, ImagePatch,
};
pub use metrics::MetricConfig;
pub use retinex::{msr_decompose, RetinexPair};
