//! Quadrant labels for comparing the pathology-aware score against another metric.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    /// Both scores high.
    AH,
    /// Both scores low.
    AL,
    /// Pathology-aware score high, other metric low.
    PD,
    /// Pathology-aware score low, other metric high.
    TD,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::AH, Category::AL, Category::PD, Category::TD];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::AH => "AH",
            Category::AL => "AL",
            Category::PD => "PD",
            Category::TD => "TD",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "AH" => Ok(Category::AH),
            "AL" => Ok(Category::AL),
            "PD" => Ok(Category::PD),
            "TD" => Ok(Category::TD),
            other => Err(Error::arg(format!("unknown category `{other}`"))),
        }
    }
}

/// Cut points on the two axes. A score equal to its threshold counts as high.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub papis: f64,
    pub other: f64,
}

pub fn categorize_point(papis: f64, other: f64, t: Thresholds) -> Category {
    match (papis >= t.papis, other >= t.other) {
        (true, true) => Category::AH,
        (false, false) => Category::AL,
        (true, false) => Category::PD,
        (false, true) => Category::TD,
    }
}

/// Labels every `(papis, other)` point.
pub fn categorize(points: &[(f64, f64)], t: Thresholds) -> Vec<Category> {
    points
        .iter()
        .map(|&(p, o)| categorize_point(p, o, t))
        .collect()
}

/// Lower median of each axis.
pub fn default_thresholds(points: &[(f64, f64)]) -> Result<Thresholds> {
    if points.len() < 2 {
        return Err(Error::arg(format!(
            "need at least 2 points for median thresholds, got {}",
            points.len()
        )));
    }
    Ok(Thresholds {
        papis: lower_median(points.iter().map(|p| p.0).collect())?,
        other: lower_median(points.iter().map(|p| p.1).collect())?,
    })
}

fn lower_median(mut values: Vec<f64>) -> Result<f64> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::arg("cannot take the median of NaN scores"));
    }
    let k = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    Ok(*m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_quadrants() {
        let t = Thresholds {
            papis: 0.5,
            other: 0.5,
        };
        let pts = [(0.9, 0.9), (0.1, 0.1), (0.9, 0.1), (0.1, 0.9), (0.5, 0.5)];
        assert_eq!(
            categorize(&pts, t),
            vec![
                Category::AH,
                Category::AL,
                Category::PD,
                Category::TD,
                Category::AH
            ]
        );
    }

    #[test]
    fn lower_median_thresholds() {
        let t = default_thresholds(&[(0.2, 0.8), (0.8, 0.2)]).unwrap();
        assert_eq!(
            t,
            Thresholds {
                papis: 0.2,
                other: 0.2
            }
        );
        let same = [(0.4, 0.7); 5];
        let t = default_thresholds(&same).unwrap();
        assert_eq!(
            t,
            Thresholds {
                papis: 0.4,
                other: 0.7
            }
        );
        assert!(categorize(&same, t).iter().all(|&c| c == Category::AH));
        assert!(default_thresholds(&[(0.1, 0.1)]).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for c in Category::ALL {
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
        }
        assert!("XX".parse::<Category>().is_err());
    }
}
