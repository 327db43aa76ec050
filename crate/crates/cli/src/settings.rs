//! Effective run settings: built-in defaults, then the `--config` file, then
//! individual flags.

use std::path::{Path, PathBuf};

use papis::features::FilterBankSpec;
use papis::metrics::ScoreConvention;
use papis::wsi::TissueFilter;
use papis::{ExtractorSpec, MetricConfig};
use serde::{Deserialize, Serialize};

use crate::args::{parse_extractor, ConventionArg, ExtractorArg, GlobalArgs, TissueArgs};
use crate::failure::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    metric: Option<MetricConfig>,
    extractor: Option<String>,
    filter_bank: Option<FilterBankSpec>,
    seed: Option<u64>,
    threads: Option<usize>,
    tissue_filter: Option<TissueFilter>,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub metric: MetricConfig,
    pub extractor: ExtractorArg,
    pub bank: FilterBankSpec,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub tissue: TissueFilter,
}

/// What gets recorded next to outputs so a run can be repeated.
#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub extractor: String,
    pub filter_bank: &'a FilterBankSpec,
    pub metric: &'a MetricConfig,
}

impl Settings {
    pub fn resolve(g: &GlobalArgs) -> Result<Self, Failure> {
        let file = match &g.config {
            Some(path) => load_file(path)?,
            None => FileConfig::default(),
        };
        let mut metric = file.metric.unwrap_or_default();
        let mut extractor = match &file.extractor {
            Some(s) => parse_extractor(s)
                .map_err(|e| Failure::argument(format!("config `extractor`: {e}")))?,
            None => ExtractorArg::FilterBank,
        };
        if let Some(e) = &g.extractor {
            extractor = e.clone();
        }
        if let Some(l) = g.lambda {
            metric.lambda = l;
        }
        if let Some(c) = g.convention {
            metric.score_convention = match c {
                ConventionArg::Similarity => ScoreConvention::Similarity,
                ConventionArg::Literal => ScoreConvention::Literal,
            };
        }
        let seed = g.seed.or(file.seed).unwrap_or(metric.seed);
        metric.seed = seed;
        metric
            .validate()
            .map_err(|e| Failure::argument(format!("metric settings: {e}")))?;

        let bank = file.filter_bank.unwrap_or_default();
        ExtractorSpec::FilterBank(bank.clone())
            .validate()
            .map_err(|e| Failure::argument(format!("config `filter_bank`: {e}")))?;

        let threads = g.threads.map(|t| t as usize).or(file.threads);
        if threads == Some(0) {
            return Err(Failure::argument("config `threads` must be at least 1"));
        }
        let tissue = file.tissue_filter.unwrap_or_default();
        tissue
            .validate()
            .map_err(|e| Failure::argument(format!("config `tissue_filter`: {e}")))?;
        Ok(Self {
            metric,
            extractor,
            bank,
            seed,
            threads,
            out: g.out.clone(),
            tissue,
        })
    }

    pub fn out_dir(&self, command: &str) -> Result<&Path, Failure> {
        self.out
            .as_deref()
            .ok_or_else(|| Failure::argument(format!("--out is required for `{command}`")))
    }

    pub fn tissue_with(&self, args: &TissueArgs) -> TissueFilter {
        TissueFilter {
            luminance_max: args.luminance_max.unwrap_or(self.tissue.luminance_max),
            min_foreground_fraction: args
                .min_foreground
                .unwrap_or(self.tissue.min_foreground_fraction),
        }
    }

    pub fn filter_bank(&self) -> ExtractorSpec {
        ExtractorSpec::FilterBank(self.bank.clone())
    }

    /// Extractor for one image. With `fts1:<dir>` the features are read from
    /// `<dir>/[<modality>/]<stem>.fts1`.
    pub fn extractor_for(&self, image: &Path, modality: Option<&str>) -> ExtractorSpec {
        match &self.extractor {
            ExtractorArg::FilterBank => self.filter_bank(),
            ExtractorArg::Fts1(dir) => {
                let stem = image.file_stem().unwrap_or_default();
                let mut path = dir.clone();
                if let Some(m) = modality {
                    path.push(m);
                }
                path.push(stem);
                path.set_extension("fts1");
                ExtractorSpec::ExternalFile { path }
            }
        }
    }

    pub fn extractor_label(&self) -> String {
        match &self.extractor {
            ExtractorArg::FilterBank => "filterbank".into(),
            ExtractorArg::Fts1(dir) => format!("fts1:{}", dir.display()),
        }
    }

    pub fn record<'a>(&'a self, command: &'a str) -> RunRecord<'a> {
        RunRecord {
            command,
            seed: self.seed,
            extractor: self.extractor_label(),
            filter_bank: &self.bank,
            metric: &self.metric,
        }
    }
}

fn load_file(path: &Path) -> Result<FileConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Failure::from(papis::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::argument(format!("config {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn settings(args: &[&str], config: Option<&str>) -> Result<Settings, Failure> {
        let dir = tempfile::tempdir().unwrap();
        let mut argv = vec!["papis".to_string()];
        if let Some(text) = config {
            let p = dir.path().join("c.json");
            std::fs::write(&p, text).unwrap();
            argv.push("--config".into());
            argv.push(p.display().to_string());
        }
        argv.extend(args.iter().map(|s| s.to_string()));
        argv.extend(["compare", "x", "y"].map(String::from));
        let cli = crate::args::Cli::try_parse_from(argv).unwrap();
        Settings::resolve(&cli.global)
    }

    #[test]
    fn defaults() {
        let s = settings(&[], None).unwrap();
        assert_eq!(s.metric, MetricConfig::default());
        assert_eq!(s.extractor, ExtractorArg::FilterBank);
        assert_eq!(s.seed, 0);
    }

    #[test]
    fn flags_override_file() {
        let cfg = r#"{"metric": {"lambda": 0.5, "c1": 1e-5}, "seed": 3}"#;
        let s = settings(&[], Some(cfg)).unwrap();
        assert_eq!((s.metric.lambda, s.metric.c1, s.seed), (0.5, 1e-5, 3));
        let s = settings(&["--lambda", "0.25", "--seed", "9"], Some(cfg)).unwrap();
        assert_eq!(
            (s.metric.lambda, s.metric.c1, s.seed, s.metric.seed),
            (0.25, 1e-5, 9, 9)
        );
    }

    #[test]
    fn bad_file_values_are_argument_errors() {
        let e = settings(&[], Some(r#"{"metric": {"lambda": -1}}"#)).unwrap_err();
        assert_eq!(e.code, 2);
        assert!(e.message.contains("lambda"));
        assert_eq!(settings(&[], Some(r#"{"bogus": 1}"#)).unwrap_err().code, 2);
        assert_eq!(
            settings(&[], Some(r#"{"extractor": "nope"}"#))
                .unwrap_err()
                .code,
            2
        );
    }

    #[test]
    fn fts1_paths() {
        let s = settings(&["--extractor", "fts1:feat"], None).unwrap();
        assert_eq!(
            s.extractor_for(Path::new("dir/img_3.png"), Some("b")),
            ExtractorSpec::ExternalFile {
                path: PathBuf::from("feat/b/img_3.fts1")
            }
        );
        assert_eq!(
            s.extractor_for(Path::new("img.tif"), None),
            ExtractorSpec::ExternalFile {
                path: PathBuf::from("feat/img.fts1")
            }
        );
    }
}
