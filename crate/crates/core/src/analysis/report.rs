//! Per-pair score reports: CSV/JSON serialization and external score ingestion.
//!
//! Numbers are written rounded to 9 significant digits in their shortest
//! decimal form, so write -> read -> write reproduces the same bytes. PSNR of
//! identical images is the token `inf`.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde_json::{Map, Number, Value};

use super::categorize::Category;
use crate::error::{Error, Result};

/// Metric columns of the report, in order.
pub const REPORT_METRICS: [&str; 6] = ["psnr", "ssim", "ms_ssim", "papis", "lpips", "dists"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairReport {
    pub pair_id: String,
    pub scores: BTreeMap<String, f64>,
    pub category: Option<Category>,
}

impl PairReport {
    pub fn new(pair_id: impl Into<String>) -> Self {
        Self {
            pair_id: pair_id.into(),
            ..Default::default()
        }
    }

    pub fn with(mut self, metric: &str, score: f64) -> Self {
        self.scores.insert(metric.to_string(), score);
        self
    }

    pub fn score(&self, metric: &str) -> Option<f64> {
        self.scores.get(metric).copied()
    }
}

/// Rounds to 9 significant digits.
pub fn round_sig9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

pub fn format_score(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{}", round_sig9(v))
    }
}

pub fn parse_score(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        t => t.parse().ok().filter(|v: &f64| v.is_finite()),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn check_unique(reports: &[PairReport]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in reports {
        if !seen.insert(r.pair_id.as_str()) {
            return Err(Error::arg(format!("duplicate pair_id `{}`", r.pair_id)));
        }
    }
    Ok(())
}

/// Writes the report CSV: `pair_id,psnr,ssim,ms_ssim,papis,lpips,dists,category`.
pub fn write_csv(reports: &[PairReport], out: impl Write) -> Result<()> {
    check_unique(reports)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["pair_id"];
    header.extend(REPORT_METRICS);
    header.push("category");
    w.write_record(&header).map_err(csv_error)?;
    for r in reports {
        let mut row = vec![r.pair_id.clone()];
        row.extend(
            REPORT_METRICS
                .iter()
                .map(|m| r.score(m).map(format_score).unwrap_or_default()),
        );
        row.push(r.category.map(|c| c.to_string()).unwrap_or_default());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn read_csv(input: impl Read) -> Result<Vec<PairReport>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let mut expected = vec!["pair_id"];
    expected.extend(REPORT_METRICS);
    expected.push("category");
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "unexpected header `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut reports = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut report = PairReport::new(&record[0]);
        for (i, metric) in REPORT_METRICS.iter().enumerate() {
            let field = &record[i + 1];
            if field.is_empty() {
                continue;
            }
            let v = parse_score(field).ok_or_else(|| Error::Parse {
                line,
                message: format!("bad {metric} value `{field}`"),
            })?;
            report.scores.insert(metric.to_string(), v);
        }
        let cat = &record[REPORT_METRICS.len() + 1];
        if !cat.is_empty() {
            report.category = Some(cat.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad category `{cat}`"),
            })?);
        }
        reports.push(report);
    }
    check_unique(&reports)?;
    Ok(reports)
}

fn score_value(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(Number::from_f64(round_sig9(v)).expect("finite"))
    } else {
        Value::String(format_score(v))
    }
}

/// One report as the JSON object used in report files.
pub fn report_value(r: &PairReport) -> Value {
    let mut obj = Map::new();
    obj.insert("pair_id".into(), Value::String(r.pair_id.clone()));
    for m in REPORT_METRICS {
        obj.insert(m.into(), r.score(m).map(score_value).unwrap_or(Value::Null));
    }
    obj.insert(
        "category".into(),
        r.category
            .map(|c| Value::String(c.to_string()))
            .unwrap_or(Value::Null),
    );
    Value::Object(obj)
}

/// Writes the report as a JSON array of objects with the CSV's field names.
pub fn write_json(reports: &[PairReport]) -> Result<String> {
    check_unique(reports)?;
    let array: Vec<Value> = reports.iter().map(report_value).collect();
    let mut s = serde_json::to_string_pretty(&Value::Array(array)).expect("values serialize");
    s.push('\n');
    Ok(s)
}

pub fn read_json(text: &str) -> Result<Vec<PairReport>> {
    let parse_err = |m: String| Error::Parse {
        line: 0,
        message: m,
    };
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let items = value
        .as_array()
        .ok_or_else(|| parse_err("report JSON must be an array".into()))?;
    let mut reports = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let obj = item
            .as_object()
            .ok_or_else(|| parse_err(format!("entry {i} is not an object")))?;
        let id = obj
            .get("pair_id")
            .and_then(Value::as_str)
            .ok_or_else(|| parse_err(format!("entry {i} lacks pair_id")))?;
        let mut report = PairReport::new(id);
        for m in REPORT_METRICS {
            match obj.get(m) {
                None | Some(Value::Null) => {}
                Some(Value::Number(n)) => {
                    report
                        .scores
                        .insert(m.into(), n.as_f64().unwrap_or(f64::NAN));
                }
                Some(Value::String(s)) => {
                    let v = parse_score(s)
                        .ok_or_else(|| parse_err(format!("entry {i}: bad {m} `{s}`")))?;
                    report.scores.insert(m.into(), v);
                }
                Some(other) => return Err(parse_err(format!("entry {i}: bad {m} {other}"))),
            }
        }
        if let Some(c) = obj.get("category").and_then(Value::as_str) {
            report.category = Some(c.parse()?);
        }
        reports.push(report);
    }
    check_unique(&reports)?;
    Ok(reports)
}

/// One externally computed score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFragment {
    pub pair_id: String,
    pub metric: String,
    pub score: f64,
}

/// Reads `pair_id,metric,score` rows, e.g. LPIPS/DISTS from third-party tools.
pub fn ingest_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreFragment>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_fragments(file)
}

pub fn parse_fragments(input: impl Read) -> Result<Vec<ScoreFragment>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header
        .iter()
        .map(str::trim)
        .ne(["pair_id", "metric", "score"])
    {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `pair_id,metric,score`".into(),
        });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let pair_id = record[0].trim().to_string();
        let metric = record[1].trim().to_ascii_lowercase();
        if pair_id.is_empty() || metric.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty pair_id or metric".into(),
            });
        }
        let score = parse_score(&record[2])
            .filter(|v| !v.is_nan())
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("bad score `{}`", &record[2]),
            })?;
        if !seen.insert((pair_id.clone(), metric.clone())) {
            return Err(Error::Conflict { pair_id, metric });
        }
        out.push(ScoreFragment {
            pair_id,
            metric,
            score,
        });
    }
    Ok(out)
}

/// Adds fragments to `reports`, creating reports for unseen pairs. Leaves the
/// set sorted by `pair_id`.
pub fn merge_fragments(reports: &mut Vec<PairReport>, fragments: &[ScoreFragment]) -> Result<()> {
    let mut index: BTreeMap<String, PairReport> =
        reports.drain(..).map(|r| (r.pair_id.clone(), r)).collect();
    for f in fragments {
        let report = index
            .entry(f.pair_id.clone())
            .or_insert_with(|| PairReport::new(&f.pair_id));
        if report.scores.contains_key(&f.metric) {
            return Err(Error::Conflict {
                pair_id: f.pair_id.clone(),
                metric: f.metric.clone(),
            });
        }
        report.scores.insert(f.metric.clone(), f.score);
    }
    reports.extend(index.into_values());
    Ok(())
}
