//! Correlating measure series with human suspense curves.
//!
//! For each story, both the model series and every annotator's absolute
//! curve are z-scored, Spearman's rho and Kendall's tau are computed per
//! annotator on the positions present in both, and the per-annotator values
//! are averaged. Story values are then averaged over the corpus. The human
//! upper bound is the mean pairwise correlation between annotators.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{group_by_story, AnnotationError, AnnotationSet, JudgmentMapping};
use crate::correlation::{align, fisher_ci, kendall, spearman, CorrelationError};
use crate::measures::{zscore, MeasureError};
use crate::series::MeasureSeries;
use crate::story::Corpus;

pub const REPORT_SCHEMA: &str = "suspense.report/1";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no story has both a model series and annotations")]
    NoOverlap,
    #[error("no story has two or more annotators")]
    InsufficientAnnotators,
    #[error("story `{0}`: no annotator curve yields a defined correlation")]
    NoValidAnnotator(String),
    #[error("story `{0}` is not in the corpus")]
    UnknownStory(String),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub rho: f64,
    pub tau: f64,
    /// Number of annotator curves (or annotator pairs) averaged.
    pub n_compared: usize,
    /// Smallest number of aligned positions behind any averaged value.
    pub n_points: usize,
}

fn correlate(a: &[Option<f64>], b: &[Option<f64>]) -> Result<(f64, f64, usize), EvalError> {
    let za = zscore(a)?;
    let zb = zscore(b)?;
    let (x, y) = align(&za, &zb);
    Ok((spearman(&x, &y)?, kendall(&x, &y)?, x.len()))
}

/// Mean over annotators of the rank correlation between the model series and
/// each annotator curve. Annotator curves without a defined correlation
/// (e.g. constant) are skipped.
pub fn evaluate_model(
    series: &[Option<f64>],
    human_curves: &[Vec<Option<f64>>],
    story_id: &str,
) -> Result<RankCorrelation, EvalError> {
    zscore(series)?;
    let mut acc = Vec::new();
    for curve in human_curves {
        match correlate(series, curve) {
            Ok(v) => acc.push(v),
            Err(e) => warn!("story `{story_id}`: skipping annotator curve: {e}"),
        }
    }
    mean_of(&acc).ok_or_else(|| EvalError::NoValidAnnotator(story_id.to_string()))
}

fn mean_of(values: &[(f64, f64, usize)]) -> Option<RankCorrelation> {
    if values.is_empty() {
        return None;
    }
    let k = values.len() as f64;
    Some(RankCorrelation {
        rho: values.iter().map(|v| v.0).sum::<f64>() / k,
        tau: values.iter().map(|v| v.1).sum::<f64>() / k,
        n_compared: values.len(),
        n_points: values.iter().map(|v| v.2).min().unwrap_or(0),
    })
}

/// Mean over unordered annotator pairs of their rank correlation.
pub fn pairwise_agreement(curves: &[Vec<Option<f64>>]) -> Option<RankCorrelation> {
    let mut acc = Vec::new();
    for (i, a) in curves.iter().enumerate() {
        for b in &curves[i + 1..] {
            if let Ok(v) = correlate(a, b) {
                acc.push(v);
            }
        }
    }
    mean_of(&acc)
}

/// Human upper bound: pairwise annotator correlation averaged per story,
/// then over stories. Stories with fewer than two annotators are ignored.
pub fn human_upper_bound(stories: &[Vec<Vec<Option<f64>>>]) -> Result<(f64, f64), EvalError> {
    let per_story: Vec<RankCorrelation> = stories
        .iter()
        .filter(|c| c.len() >= 2)
        .filter_map(|c| pairwise_agreement(c))
        .collect();
    if per_story.is_empty() {
        return Err(EvalError::InsufficientAnnotators);
    }
    let k = per_story.len() as f64;
    Ok((
        per_story.iter().map(|r| r.rho).sum::<f64>() / k,
        per_story.iter().map(|r| r.tau).sum::<f64>() / k,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// `story` or `aggregate`.
    pub scope: String,
    pub story_id: Option<String>,
    pub measure: String,
    pub rollout: Option<usize>,
    pub source: Option<String>,
    pub tau: f64,
    pub rho: f64,
    pub tau_ci_lo: Option<f64>,
    pub tau_ci_hi: Option<f64>,
    pub rho_ci_lo: Option<f64>,
    pub rho_ci_hi: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub schema: String,
    pub rows: Vec<ReportRow>,
}

/// Per story, one absolute curve per annotator.
pub type StoryCurves = Vec<(String, Vec<Vec<Option<f64>>>)>;

/// Absolute human curves per story, aligned to sentence indices.
pub fn human_curves(
    corpus: &Corpus,
    annotations: &[AnnotationSet],
    mapping: &JudgmentMapping,
) -> Result<StoryCurves, EvalError> {
    group_by_story(annotations)
        .into_iter()
        .map(|(id, group)| {
            let story = corpus
                .get(&id)
                .ok_or_else(|| EvalError::UnknownStory(id.clone()))?;
            let curves = group
                .iter()
                .map(|a| a.absolute_curve(story, mapping))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((id, curves))
        })
        .collect()
}

fn ci(r: f64, n: usize, p: f64) -> (Option<f64>, Option<f64>) {
    match fisher_ci(r, n, p) {
        Ok((lo, hi)) => (Some(lo), Some(hi)),
        Err(_) => (None, None),
    }
}

/// Builds per-story and aggregate rows for every measure in `series`, plus
/// a human upper-bound row. Aggregate intervals use the number of stories as
/// the sample size; per-story intervals use the aligned sentence count.
pub fn evaluate_corpus(
    series: &[MeasureSeries],
    curves: &[(String, Vec<Vec<Option<f64>>>)],
    p: f64,
) -> Result<CorrelationReport, EvalError> {
    let mut rows = Vec::new();
    let mut measures: Vec<_> = Vec::new();
    for s in series {
        if !measures.contains(&s.measure) {
            measures.push(s.measure);
        }
    }
    let mut any_overlap = false;
    for m in measures {
        let mut story_rows = Vec::new();
        let mut provenance = None;
        for s in series.iter().filter(|s| s.measure == m) {
            provenance.get_or_insert((s.config.rollout, s.config.source));
            let Some((_, human)) = curves.iter().find(|(id, _)| *id == s.story_id) else {
                warn!("story `{}`: no annotations, excluded", s.story_id);
                continue;
            };
            match evaluate_model(&s.values, human, &s.story_id) {
                Ok(rc) => story_rows.push((s.story_id.clone(), rc)),
                Err(e) => warn!("story `{}` measure {m}: excluded: {e}", s.story_id),
            }
        }
        let (rollout, source) = provenance.unwrap_or((None, None));
        let source = source.map(|s| s.as_str().to_string());
        if story_rows.is_empty() {
            continue;
        }
        any_overlap = true;
        for (id, rc) in &story_rows {
            let (rho_ci_lo, rho_ci_hi) = ci(rc.rho, rc.n_points, p);
            let (tau_ci_lo, tau_ci_hi) = ci(rc.tau, rc.n_points, p);
            rows.push(ReportRow {
                scope: "story".into(),
                story_id: Some(id.clone()),
                measure: m.to_string(),
                rollout,
                source: source.clone(),
                tau: rc.tau,
                rho: rc.rho,
                tau_ci_lo,
                tau_ci_hi,
                rho_ci_lo,
                rho_ci_hi,
                n: rc.n_points,
            });
        }
        rows.push(aggregate_row(
            m.as_str(),
            rollout,
            source,
            story_rows.iter().map(|(_, rc)| (rc.rho, rc.tau)),
            p,
        ));
    }
    if !any_overlap {
        return Err(EvalError::NoOverlap);
    }
    let per_story: Vec<Vec<Vec<Option<f64>>>> = curves.iter().map(|(_, c)| c.clone()).collect();
    let multi = per_story.iter().filter(|c| c.len() >= 2).count();
    match human_upper_bound(&per_story) {
        Ok(_) => {
            let pairs = per_story
                .iter()
                .filter(|c| c.len() >= 2)
                .filter_map(|c| pairwise_agreement(c));
            rows.push(aggregate_row(
                "Human",
                None,
                None,
                pairs.map(|r| (r.rho, r.tau)),
                p,
            ));
        }
        Err(e) => warn!("no human upper bound ({multi} multi-annotator stories): {e}"),
    }
    Ok(CorrelationReport {
        schema: REPORT_SCHEMA.to_string(),
        rows,
    })
}

fn aggregate_row(
    measure: &str,
    rollout: Option<usize>,
    source: Option<String>,
    values: impl Iterator<Item = (f64, f64)>,
    p: f64,
) -> ReportRow {
    let values: Vec<(f64, f64)> = values.collect();
    let k = values.len();
    let rho = values.iter().map(|v| v.0).sum::<f64>() / k as f64;
    let tau = values.iter().map(|v| v.1).sum::<f64>() / k as f64;
    let (rho_ci_lo, rho_ci_hi) = ci(rho, k, p);
    let (tau_ci_lo, tau_ci_hi) = ci(tau, k, p);
    ReportRow {
        scope: "aggregate".into(),
        story_id: None,
        measure: measure.to_string(),
        rollout,
        source,
        tau,
        rho,
        tau_ci_lo,
        tau_ci_hi,
        rho_ci_lo,
        rho_ci_hi,
        n: k,
    }
}

impl CorrelationReport {
    pub fn aggregate(&self, measure: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.scope == "aggregate" && r.measure == measure)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> csv::Result<()> {
        writeln!(out, "#schema={}", self.schema)?;
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(out, self)
    }
}
