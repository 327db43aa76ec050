//! Evaluation harness: per-pair reports, quadrant labels and patch heatmaps.

mod categorize;
pub mod colormap;
mod heatmap;
mod report;

pub use categorize::{categorize, categorize_point, default_thresholds, Category, Thresholds};
pub use heatmap::{
    heatmap, heatmap_image, lut_index, render_heatmap, render_heatmap_with_seed,
    render_side_by_side, HeatmapGrid, HeatmapMetric, HeatmapOptions, HeatmapSidecar, RenderParams,
};
pub use report::{
    format_score, ingest_scores, merge_fragments, parse_fragments, parse_score, read_csv,
    read_json, report_value, round_sig9, write_csv, write_json, PairReport, ScoreFragment,
    REPORT_METRICS,
};
