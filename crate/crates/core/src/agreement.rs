//! Krippendorff's alpha and annotator screening.
//!
//! Reliability data is a list of units, each holding the category codes that
//! the annotators of that unit assigned. Only units with at least two values
//! are pairable and contribute.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{group_by_story, AnnotationSet, RelativeLabel};

#[derive(Debug, Error, PartialEq)]
pub enum AgreementError {
    #[error("no pairable values: every unit has fewer than two annotations")]
    NoPairableValues,
    #[error("all pairable values are identical; expected disagreement is zero")]
    DegenerateData,
    #[error("category code {0} out of range for {1} categories")]
    BadCategory(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricLevel {
    Nominal,
    #[default]
    Ordinal,
    Interval,
}

impl std::str::FromStr for MetricLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nominal" => Ok(MetricLevel::Nominal),
            "ordinal" => Ok(MetricLevel::Ordinal),
            "interval" => Ok(MetricLevel::Interval),
            other => Err(format!("unknown metric level `{other}`")),
        }
    }
}

/// Squared difference between categories `c` and `k` given the marginal
/// counts of pairable values.
pub fn delta_squared(level: MetricLevel, c: usize, k: usize, marginals: &[f64]) -> f64 {
    match level {
        MetricLevel::Nominal => f64::from(u8::from(c != k)),
        MetricLevel::Interval => (c as f64 - k as f64).powi(2),
        MetricLevel::Ordinal => {
            let (lo, hi) = if c <= k { (c, k) } else { (k, c) };
            let span: f64 = marginals[lo..=hi].iter().sum();
            (span - (marginals[lo] + marginals[hi]) / 2.0).powi(2)
        }
    }
}

/// Krippendorff's alpha over `categories` codes `0..categories`, via the
/// coincidence matrix.
pub fn krippendorff_alpha(
    units: &[Vec<usize>],
    categories: usize,
    level: MetricLevel,
) -> Result<f64, AgreementError> {
    let mut coincidence = vec![vec![0.0; categories]; categories];
    for unit in units {
        if let Some(&bad) = unit.iter().find(|&&v| v >= categories) {
            return Err(AgreementError::BadCategory(bad, categories));
        }
        let m = unit.len();
        if m < 2 {
            continue;
        }
        let mut counts = vec![0.0; categories];
        for &v in unit {
            counts[v] += 1.0;
        }
        let w = 1.0 / (m as f64 - 1.0);
        for c in 0..categories {
            for k in 0..categories {
                let pairs = if c == k {
                    counts[c] * (counts[c] - 1.0)
                } else {
                    counts[c] * counts[k]
                };
                coincidence[c][k] += pairs * w;
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n < 2.0 {
        return Err(AgreementError::NoPairableValues);
    }
    let (mut observed, mut expected) = (0.0, 0.0);
    for c in 0..categories {
        for k in 0..categories {
            let d = delta_squared(level, c, k, &marginals);
            observed += coincidence[c][k] * d;
            expected += marginals[c] * marginals[k] * d;
        }
    }
    if expected == 0.0 {
        return Err(AgreementError::DegenerateData);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

/// Units keyed by (story, label position), holding ordinal label codes.
pub fn units_from_annotations(annotations: &[AnnotationSet]) -> Vec<Vec<usize>> {
    let mut units: BTreeMap<(String, usize), Vec<usize>> = BTreeMap::new();
    for a in annotations {
        for (i, l) in a.labels.iter().enumerate() {
            units
                .entry((a.story_id.clone(), i))
                .or_default()
                .push(l.ordinal());
        }
    }
    units.into_values().collect()
}

pub fn annotation_alpha(
    annotations: &[AnnotationSet],
    level: MetricLevel,
) -> Result<f64, AgreementError> {
    krippendorff_alpha(
        &units_from_annotations(annotations),
        RelativeLabel::ALL.len(),
        level,
    )
}

/// Mean agreement of one annotator with each co-annotator, over the stories
/// they annotated. Pairs without any disagreement to measure are skipped;
/// `None` when no pair was measurable.
pub fn per_annotator_alpha(
    annotations: &[AnnotationSet],
    level: MetricLevel,
) -> BTreeMap<String, Option<f64>> {
    let mut sums: HashMap<String, (f64, usize)> = HashMap::new();
    let mut seen: BTreeMap<String, Option<f64>> = BTreeMap::new();
    for (_, group) in group_by_story(annotations) {
        for a in &group {
            seen.entry(a.annotator_id.clone()).or_insert(None);
        }
        for (i, a) in group.iter().enumerate() {
            for b in group.iter().skip(i + 1) {
                let pair = [(*a).clone(), (*b).clone()];
                if let Ok(alpha) = annotation_alpha(&pair, level) {
                    for who in [&a.annotator_id, &b.annotator_id] {
                        let e = sums.entry(who.clone()).or_insert((0.0, 0));
                        e.0 += alpha;
                        e.1 += 1;
                    }
                }
            }
        }
    }
    for (who, (s, n)) in sums {
        seen.insert(who, Some(s / n as f64));
    }
    seen
}

/// Screening thresholds: annotators below either are flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeningThresholds {
    pub min_alpha: f64,
    pub min_rt_ms: f64,
}

impl Default for ScreeningThresholds {
    fn default() -> Self {
        ScreeningThresholds {
            min_alpha: 0.35,
            min_rt_ms: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorScreen {
    pub annotator_id: String,
    pub mean_alpha: Option<f64>,
    pub mean_rt_ms: Option<f64>,
    pub low_agreement: bool,
    pub fast_reader: bool,
}

impl AnnotatorScreen {
    pub fn flagged(&self) -> bool {
        self.low_agreement || self.fast_reader
    }
}

/// Mean reading time per annotator over the sets that report one.
pub fn mean_reading_times(annotations: &[AnnotationSet]) -> BTreeMap<String, Option<f64>> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for a in annotations {
        let e = acc.entry(a.annotator_id.clone()).or_insert((0.0, 0));
        if let Some(rt) = a.mean_rt_ms {
            e.0 += rt;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, (n > 0).then(|| s / n as f64)))
        .collect()
}

/// Flags annotators whose mean agreement or mean reading time falls below
/// the thresholds. Missing statistics never trigger a flag.
pub fn screen_annotators(
    agreement: &BTreeMap<String, Option<f64>>,
    reading_times: &BTreeMap<String, Option<f64>>,
    thresholds: ScreeningThresholds,
) -> Vec<AnnotatorScreen> {
    let mut ids: Vec<&String> = agreement.keys().chain(reading_times.keys()).collect();
    ids.sort();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let mean_alpha = agreement.get(id).copied().flatten();
            let mean_rt_ms = reading_times.get(id).copied().flatten();
            AnnotatorScreen {
                annotator_id: id.clone(),
                mean_alpha,
                mean_rt_ms,
                low_agreement: mean_alpha.is_some_and(|a| a < thresholds.min_alpha),
                fast_reader: mean_rt_ms.is_some_and(|rt| rt < thresholds.min_rt_ms),
            }
        })
        .collect()
}
