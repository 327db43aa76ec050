use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use papis::analysis::HeatmapMetric;

#[derive(Debug, Parser)]
#[command(
    name = "papis",
    version,
    about = "Pathology-aware perceptual image similarity: scoring, reports, heatmaps and datasets",
    after_help = "Exit codes: 0 success, 2 bad arguments, 3 unreadable or malformed input, 4 dimension mismatch.\n\
                  Errors are printed to stderr as a JSON object."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; individual flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice (weight tables, crops, flips).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, allow_negative_numbers = true, global = true, value_parser = clap::value_parser!(u32).range(1..=1024))]
    pub threads: Option<u32>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// `filterbank`, or `fts1:<dir>` to read precomputed features per image.
    #[arg(long, global = true, value_name = "SPEC", value_parser = parse_extractor)]
    pub extractor: Option<ExtractorArg>,
    /// Weight of the illumination term.
    #[arg(long, allow_negative_numbers = true, global = true, value_parser = non_negative)]
    pub lambda: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub convention: Option<ConventionArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score one image pair with PSNR, SSIM, MS-SSIM and PaPIS.
    Compare { a: PathBuf, b: PathBuf },
    /// Score every pair under `a/` and `b/`, or every entry of a dataset manifest.
    Batch {
        /// Directory with `a/` and `b/` subdirectories, a dataset directory, or a manifest.json.
        input: PathBuf,
        /// CSV of external scores with header `pair_id,metric,score`.
        #[arg(long, value_name = "CSV")]
        ingest: Option<PathBuf>,
        /// Label quadrants against another metric, e.g. `vs=ssim`.
        #[arg(long, value_name = "vs=METRIC", value_parser = parse_categorize)]
        categorize: Option<String>,
    },
    /// Patch-wise score grids of two registered slides.
    Heatmap {
        a: PathBuf,
        b: PathBuf,
        /// psnr, ssim, ms_ssim or papis; repeat for several grids.
        #[arg(long = "metric", required = true, value_parser = parse_metric)]
        metrics: Vec<HeatmapMetric>,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1024, value_parser = clap::value_parser!(u32).range(1..))]
        patch_size: u32,
        /// Pixels per grid cell in the rendered PNG.
        #[arg(long, allow_negative_numbers = true, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=4096))]
        scale: u32,
        #[command(flatten)]
        tissue: TissueArgs,
        /// Score background patches too.
        #[arg(long)]
        no_tissue_filter: bool,
    },
    /// Write the multi-scale illumination and reflectance maps of an image.
    Decompose {
        image: PathBuf,
        /// Comma-separated blur widths in pixels.
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',', value_parser = positive)]
        sigmas: Option<Vec<f64>>,
        #[arg(long, allow_negative_numbers = true, value_parser = open_unit)]
        epsilon: Option<f64>,
    },
    /// Write per-layer channel means and the unified reconstruction of an image.
    Features {
        image: PathBuf,
        /// Also export the normalized stack as an FTS1 file.
        #[arg(long, value_name = "FILE")]
        export_fts: Option<PathBuf>,
    },
    /// Cut synchronized patch pairs from two registered slides.
    Dataset {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Grid)]
        mode: ModeArg,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1024, value_parser = clap::value_parser!(u32).range(1..))]
        patch_size: u32,
        /// Accepted pairs wanted in random mode.
        #[arg(long, allow_negative_numbers = true, default_value_t = 206, value_parser = clap::value_parser!(u32).range(1..))]
        count: u32,
        #[arg(long, allow_negative_numbers = true, default_value_t = 256, value_parser = clap::value_parser!(u32).range(1..))]
        output_size: u32,
        /// Keep patches unflipped.
        #[arg(long)]
        no_flip: bool,
        #[command(flatten)]
        tissue: TissueArgs,
    },
}

#[derive(Debug, Args)]
pub struct TissueArgs {
    /// Pixels darker than this luma count as foreground.
    #[arg(long, allow_negative_numbers = true, value_parser = luminance)]
    pub luminance_max: Option<f64>,
    /// Minimum foreground fraction for a patch to count as tissue.
    #[arg(long, allow_negative_numbers = true, value_parser = fraction)]
    pub min_foreground: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExtractorArg {
    FilterBank,
    Fts1(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Similarity,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Grid,
    Random,
}

pub fn parse_extractor(s: &str) -> Result<ExtractorArg, String> {
    match s.split_once(':') {
        None if s == "filterbank" => Ok(ExtractorArg::FilterBank),
        Some(("fts1", dir)) if !dir.is_empty() => Ok(ExtractorArg::Fts1(PathBuf::from(dir))),
        _ => Err("expected `filterbank` or `fts1:<dir>`".into()),
    }
}

fn parse_metric(s: &str) -> Result<HeatmapMetric, String> {
    s.parse().map_err(|e: papis::Error| e.to_string())
}

fn parse_categorize(s: &str) -> Result<String, String> {
    let metric = s
        .strip_prefix("vs=")
        .ok_or_else(|| "expected `vs=<metric>`".to_string())?;
    let known = papis::analysis::REPORT_METRICS;
    if metric == "papis" || !known.contains(&metric) {
        return Err(format!(
            "`{metric}` is not a comparison metric; use one of psnr, ssim, ms_ssim, lpips, dists"
        ));
    }
    Ok(metric.to_string())
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err("must be finite".into());
    }
    Ok(v)
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v < 0.0 {
        return Err("must be >= 0".into());
    }
    Ok(v)
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v <= 0.0 {
        return Err("must be > 0".into());
    }
    Ok(v)
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if !(v > 0.0 && v < 1.0) {
        return Err("must lie strictly between 0 and 1".into());
    }
    Ok(v)
}

fn luminance(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if !(v > 0.0 && v <= 1.0) {
        return Err("must lie in (0, 1]".into());
    }
    Ok(v)
}

fn fraction(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if !(0.0..=1.0).contains(&v) {
        return Err("must lie in [0, 1]".into());
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn extractor_specs() {
        assert_eq!(parse_extractor("filterbank"), Ok(ExtractorArg::FilterBank));
        assert_eq!(
            parse_extractor("fts1:feats/x"),
            Ok(ExtractorArg::Fts1(PathBuf::from("feats/x")))
        );
        assert!(parse_extractor("fts1:").is_err());
        assert!(parse_extractor("vgg").is_err());
    }

    #[test]
    fn categorize_targets() {
        assert_eq!(parse_categorize("vs=ssim").unwrap(), "ssim");
        assert!(parse_categorize("vs=papis").is_err());
        assert!(parse_categorize("ssim").is_err());
    }

    #[test]
    fn ranges() {
        assert!(non_negative("0").is_ok());
        assert!(non_negative("-0.1").is_err());
        assert!(non_negative("nan").is_err());
        assert!(open_unit("1").is_err());
        assert!(luminance("1").is_ok());
        assert!(fraction("1.5").is_err());
        assert!(positive("0").is_err());
    }
}
