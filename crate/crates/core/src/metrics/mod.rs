//! Scalar similarity measures: classic baselines and the pathology-aware score.

mod classic;
mod config;
mod papis;

pub use classic::{
    average_pool2, ms_ssim, psnr, ssim, MS_SSIM_MIN_SIZE, MS_SSIM_WEIGHTS, SSIM_K1, SSIM_K2,
    SSIM_SIGMA, SSIM_WINDOW,
};
pub use config::{make_weights, MetricConfig, ScoreConvention, WeightMode, WeightTable};
pub use papis::{
    combine, d_high, d_low, decompose_stack, loss_from_score, papis, papis_loss, papis_stacks,
    papis_with, pool_scales, total_loss, ChannelStats, Decomposition, LossWeights, PapisBreakdown,
    ScaleStack,
};
