//! Human relative suspense judgements and their conversion to absolute
//! suspense curves.
//!
//! Annotators label each sentence with a change in suspense on a five-point
//! scale. A [`JudgmentMapping`] assigns a number to each label and the
//! absolute curve is the running sum of those numbers.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::story::Story;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("{path}: line {line_no}: malformed annotation record: {reason}")]
    MalformedLine {
        path: String,
        line_no: usize,
        reason: String,
    },
    #[error("story `{story_id}` annotator `{annotator_id}`: {labels} labels for {sentences} non-skipped sentences")]
    LengthMismatch {
        story_id: String,
        annotator_id: String,
        labels: usize,
        sentences: usize,
    },
    #[error("invalid judgement mapping: {0}")]
    InvalidMapping(String),
    #[error("mapping fit needs at least {folds} annotated stories, got {stories}")]
    InsufficientData { folds: usize, stories: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelativeLabel {
    BigDecrease,
    Decrease,
    Same,
    Increase,
    BigIncrease,
}

impl RelativeLabel {
    pub const ALL: [RelativeLabel; 5] = [
        RelativeLabel::BigDecrease,
        RelativeLabel::Decrease,
        RelativeLabel::Same,
        RelativeLabel::Increase,
        RelativeLabel::BigIncrease,
    ];

    /// Position on the ordinal scale, 0 (BigDecrease) to 4 (BigIncrease).
    pub fn ordinal(self) -> usize {
        self as usize
    }
}

/// Numeric value of each relative label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgmentMapping {
    pub big_decrease: f64,
    pub decrease: f64,
    pub same: f64,
    pub increase: f64,
    pub big_increase: f64,
}

/// Smallest gap allowed between neighbouring mapping values.
pub const MIN_GAP: f64 = 0.05;

impl Default for JudgmentMapping {
    fn default() -> Self {
        JudgmentMapping {
            big_decrease: -0.2,
            decrease: -0.1,
            same: 0.0,
            increase: 0.1,
            big_increase: 0.2,
        }
    }
}

impl JudgmentMapping {
    pub fn new(values: [f64; 5]) -> Result<Self, AnnotationError> {
        let m = JudgmentMapping {
            big_decrease: values[0],
            decrease: values[1],
            same: values[2],
            increase: values[3],
            big_increase: values[4],
        };
        m.validate()?;
        Ok(m)
    }

    pub fn values(&self) -> [f64; 5] {
        [
            self.big_decrease,
            self.decrease,
            self.same,
            self.increase,
            self.big_increase,
        ]
    }

    pub fn value(&self, label: RelativeLabel) -> f64 {
        self.values()[label.ordinal()]
    }

    /// Same is zero, decreases negative, increases positive, and neighbours
    /// at least [`MIN_GAP`] apart.
    pub fn validate(&self) -> Result<(), AnnotationError> {
        let v = self.values();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(AnnotationError::InvalidMapping("non-finite value".into()));
        }
        if v[2] != 0.0 {
            return Err(AnnotationError::InvalidMapping("Same must map to 0".into()));
        }
        let eps = 1e-9;
        for w in v.windows(2) {
            if w[1] - w[0] < MIN_GAP - eps {
                return Err(AnnotationError::InvalidMapping(format!(
                    "values {} and {} are closer than {MIN_GAP}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Multiplies every value by `c > 0`.
    pub fn scaled(&self, c: f64) -> JudgmentMapping {
        let v = self.values().map(|x| x * c);
        JudgmentMapping {
            big_decrease: v[0],
            decrease: v[1],
            same: v[2],
            increase: v[3],
            big_increase: v[4],
        }
    }
}

/// Running sum of mapped labels.
pub fn to_absolute(labels: &[RelativeLabel], mapping: &JudgmentMapping) -> Vec<f64> {
    labels
        .iter()
        .scan(0.0, |acc, &l| {
            *acc += mapping.value(l);
            Some(*acc)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub story_id: String,
    pub annotator_id: String,
    pub labels: Vec<RelativeLabel>,
    pub mean_rt_ms: Option<f64>,
}

impl AnnotationSet {
    /// Absolute curve laid out on the story's sentence indices; skipped
    /// sentences stay absent.
    pub fn absolute_curve(
        &self,
        story: &Story,
        mapping: &JudgmentMapping,
    ) -> Result<Vec<Option<f64>>, AnnotationError> {
        let active = story.active_indices();
        if active.len() != self.labels.len() {
            return Err(AnnotationError::LengthMismatch {
                story_id: self.story_id.clone(),
                annotator_id: self.annotator_id.clone(),
                labels: self.labels.len(),
                sentences: active.len(),
            });
        }
        let mut out = vec![None; story.len()];
        for (i, v) in active.into_iter().zip(to_absolute(&self.labels, mapping)) {
            out[i] = Some(v);
        }
        Ok(out)
    }
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationSet>, AnnotationError> {
    let path = path.as_ref();
    read_annotations(
        BufReader::new(File::open(path)?),
        &path.display().to_string(),
    )
}

pub fn read_annotations<R: BufRead>(
    reader: R,
    name: &str,
) -> Result<Vec<AnnotationSet>, AnnotationError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let set: AnnotationSet =
            serde_json::from_str(&line).map_err(|e| AnnotationError::MalformedLine {
                path: name.to_string(),
                line_no: i + 1,
                reason: e.to_string(),
            })?;
        out.push(set);
    }
    Ok(out)
}

/// Annotation sets grouped by story id, stories in first-seen order.
pub fn group_by_story(annotations: &[AnnotationSet]) -> Vec<(String, Vec<&AnnotationSet>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<&str, Vec<&AnnotationSet>> = HashMap::new();
    for a in annotations {
        if !groups.contains_key(a.story_id.as_str()) {
            order.push(a.story_id.clone());
        }
        groups.entry(a.story_id.as_str()).or_default().push(a);
    }
    order
        .into_iter()
        .map(|id| {
            let g = groups.remove(id.as_str()).unwrap_or_default();
            (id, g)
        })
        .collect()
}

/// What annotator curves are compared against when fitting a mapping.
#[derive(Debug, Clone, Copy)]
pub enum FitTarget<'a> {
    /// The mean of all annotators' curves of the same story, under the
    /// candidate mapping itself.
    CrossAnnotatorMean,
    /// Fixed curves (e.g. model predictions) per story id, one value per
    /// label position.
    Curves(&'a HashMap<String, Vec<f64>>),
}

const GRID_STEPS: u32 = 10;

fn grid_value(steps: u32) -> f64 {
    f64::from(steps) / 20.0
}

/// Every mapping on the 0.05 grid within [-0.5, 0.5] that satisfies the
/// mapping constraints, as (big_decrease, decrease, increase, big_increase)
/// step counts.
fn mapping_grid() -> Vec<[u32; 4]> {
    let mut out = Vec::new();
    for d in 1..=GRID_STEPS {
        for bd in (d + 1)..=GRID_STEPS {
            for i in 1..=GRID_STEPS {
                for bi in (i + 1)..=GRID_STEPS {
                    out.push([bd, d, i, bi]);
                }
            }
        }
    }
    // tie-break order: smallest total magnitude, then lexicographic
    out.sort_by_key(|s| (s.iter().sum::<u32>(), [s[1], s[0], s[2], s[3]]));
    out
}

fn grid_mapping(s: [u32; 4]) -> JudgmentMapping {
    JudgmentMapping {
        big_decrease: -grid_value(s[0]),
        decrease: -grid_value(s[1]),
        same: 0.0,
        increase: grid_value(s[2]),
        big_increase: grid_value(s[3]),
    }
}

/// Mean L1 distance between each annotator's curve and the target, averaged
/// over annotators.
fn story_loss(group: &[&AnnotationSet], target: Option<&[f64]>, mapping: &JudgmentMapping) -> f64 {
    let curves: Vec<Vec<f64>> = group
        .iter()
        .map(|a| to_absolute(&a.labels, mapping))
        .collect();
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    if len == 0 {
        return 0.0;
    }
    let mean_curve: Vec<f64>;
    let target = match target {
        Some(t) => t,
        None => {
            mean_curve = (0..len)
                .map(|t| curves.iter().map(|c| c[t]).sum::<f64>() / curves.len() as f64)
                .collect();
            &mean_curve
        }
    };
    let len = len.min(target.len());
    if len == 0 {
        return 0.0;
    }
    let per_annotator: f64 = curves
        .iter()
        .map(|c| (0..len).map(|t| (c[t] - target[t]).abs()).sum::<f64>() / len as f64)
        .sum();
    per_annotator / curves.len() as f64
}

/// Grid search for the mapping with the lowest held-out L1 loss under
/// k-fold cross validation.
///
/// Stories are sorted by id and dealt round-robin into `folds` folds. A
/// mapping's score is the mean over folds of its mean per-story loss on that
/// fold. Ties within 1e-12 go to the smallest-magnitude mapping.
pub fn fit_mapping(
    annotations: &[AnnotationSet],
    target: FitTarget<'_>,
    folds: usize,
) -> Result<JudgmentMapping, AnnotationError> {
    let mut groups = group_by_story(annotations);
    if let FitTarget::Curves(curves) = target {
        groups.retain(|(id, _)| curves.contains_key(id));
    }
    if folds == 0 || groups.len() < folds {
        return Err(AnnotationError::InsufficientData {
            folds,
            stories: groups.len(),
        });
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0));

    let mut best: Option<(f64, JudgmentMapping)> = None;
    for steps in mapping_grid() {
        let mapping = grid_mapping(steps);
        let mut fold_sum = vec![0.0; folds];
        let mut fold_n = vec![0usize; folds];
        for (i, (id, group)) in groups.iter().enumerate() {
            let t = match target {
                FitTarget::CrossAnnotatorMean => None,
                FitTarget::Curves(c) => c.get(id).map(Vec::as_slice),
            };
            fold_sum[i % folds] += story_loss(group, t, &mapping);
            fold_n[i % folds] += 1;
        }
        let score = fold_sum
            .iter()
            .zip(&fold_n)
            .map(|(s, &n)| s / n as f64)
            .sum::<f64>()
            / folds as f64;
        if best.is_none_or(|(b, _)| score < b - 1e-12) {
            best = Some((score, mapping));
        }
    }
    Ok(best.map(|(_, m)| m).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use RelativeLabel::*;

    #[test]
    fn absolute_examples() {
        let m = JudgmentMapping::default();
        assert_eq!(to_absolute(&[Same, Same], &m), vec![0.0, 0.0]);
        assert_eq!(to_absolute(&[BigDecrease], &m), vec![-0.2]);
        let c = to_absolute(&[Increase, BigIncrease, Decrease], &m);
        for (a, b) in c.iter().zip([0.1, 0.3, 0.2]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mapping_validation() {
        assert!(JudgmentMapping::default().validate().is_ok());
        assert!(JudgmentMapping::new([-0.2, -0.1, 0.1, 0.2, 0.3]).is_err());
        assert!(JudgmentMapping::new([-0.2, -0.18, 0.0, 0.1, 0.2]).is_err());
        assert!(JudgmentMapping::new([-0.1, -0.05, 0.0, 0.05, 0.1]).is_ok());
    }

    #[test]
    fn curve_alignment_and_mismatch() {
        let story = Story::from_texts("s", &["one two three", "Hm.", "four five six"]);
        let a = AnnotationSet {
            story_id: "s".into(),
            annotator_id: "w1".into(),
            labels: vec![Increase, Increase],
            mean_rt_ms: None,
        };
        let curve = a
            .absolute_curve(&story, &JudgmentMapping::default())
            .unwrap();
        assert_eq!(curve, vec![Some(0.1), None, Some(0.2)]);
        let short = AnnotationSet {
            labels: vec![Same],
            ..a
        };
        assert!(matches!(
            short.absolute_curve(&story, &JudgmentMapping::default()),
            Err(AnnotationError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn read_jsonl() {
        let data = "{\"story_id\":\"s\",\"annotator_id\":\"w\",\"labels\":[\"Same\",\"BigIncrease\"],\"mean_rt_ms\":null}\n";
        let sets = read_annotations(data.as_bytes(), "mem").unwrap();
        assert_eq!(sets[0].labels, vec![Same, BigIncrease]);
        let bad = "{\"story_id\":\"s\",\"annotator_id\":\"w\",\"labels\":[\"Huge\"],\"mean_rt_ms\":null}\n";
        assert!(matches!(
            read_annotations(bad.as_bytes(), "mem"),
            Err(AnnotationError::MalformedLine { line_no: 1, .. })
        ));
    }

    fn set(story: &str, who: &str, labels: Vec<RelativeLabel>) -> AnnotationSet {
        AnnotationSet {
            story_id: story.into(),
            annotator_id: who.into(),
            labels,
            mean_rt_ms: None,
        }
    }

    #[test]
    fn fit_all_same_returns_smallest_mapping() {
        let anns: Vec<AnnotationSet> = (0..5)
            .flat_map(|s| {
                (0..3).map(move |w| set(&format!("s{s}"), &format!("w{w}"), vec![Same; 6]))
            })
            .collect();
        let m = fit_mapping(&anns, FitTarget::CrossAnnotatorMean, 5).unwrap();
        assert_eq!(m.values(), [-0.1, -0.05, 0.0, 0.05, 0.1]);
    }

    #[test]
    fn fit_recovers_generating_mapping() {
        let truth = JudgmentMapping::default();
        let pattern = [
            Increase,
            BigIncrease,
            Same,
            Decrease,
            BigDecrease,
            Increase,
            Increase,
            Same,
        ];
        let mut anns = Vec::new();
        let mut targets = HashMap::new();
        for s in 0..6 {
            let labels: Vec<RelativeLabel> =
                (0..8).map(|i| pattern[(i + s) % pattern.len()]).collect();
            targets.insert(format!("s{s}"), to_absolute(&labels, &truth));
            for w in 0..3 {
                anns.push(set(&format!("s{s}"), &format!("w{w}"), labels.clone()));
            }
        }
        let m = fit_mapping(&anns, FitTarget::Curves(&targets), 5).unwrap();
        assert_eq!(m, truth);
    }

    #[test]
    fn fit_needs_enough_stories() {
        let anns = vec![set("a", "w", vec![Same]), set("b", "w", vec![Same])];
        assert!(matches!(
            fit_mapping(&anns, FitTarget::CrossAnnotatorMean, 5),
            Err(AnnotationError::InsufficientData {
                folds: 5,
                stories: 2
            })
        ));
    }

    #[test]
    fn grid_is_valid_and_complete() {
        let g = mapping_grid();
        assert_eq!(g.len(), 45 * 45);
        for s in g {
            assert!(grid_mapping(s).validate().is_ok());
        }
    }
}
