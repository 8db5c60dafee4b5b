//! The suspense measures and change baselines.
//!
//! Backward-looking measures compare the current sentence with the previous
//! one: surprise as negative log-probability ([`hale_surprise`]) or as
//! distance between consecutive embeddings ([`ely_surprise`]).
//! Forward-looking measures look at the candidate continuations: the change
//! in their entropy ([`hale_uncertainty_reduction`]) or the expected
//! distance to them ([`ely_uncertainty`]). Both embedding-based measures
//! have importance-weighted forms.
//!
//! Logarithms are natural throughout, so entropies are in nats.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vector::{cosine, l1, l2_squared};

/// Tolerance on the total mass of a probability vector.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("probability must be in (0, 1], got {0}")]
    NonPositiveProbability(f64),
    #[error("not a probability distribution (sum {0})")]
    NotADistribution(f64),
    #[error("vector dimensions differ ({0} vs {1})")]
    DimMismatch(usize, usize),
    #[error("importance weight must be non-negative, got {0}")]
    NegativeAlpha(f64),
    #[error("zero-norm vector")]
    ZeroNormVector,
    #[error("series needs at least two present values with nonzero spread")]
    DegenerateSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum DistanceMetric {
    #[default]
    L1,
    L2,
    #[serde(rename = "L2_squared")]
    L2Squared,
}

impl DistanceMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceMetric::L1 => "L1",
            DistanceMetric::L2 => "L2",
            DistanceMetric::L2Squared => "L2_squared",
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64, MeasureError> {
        if a.len() != b.len() {
            return Err(MeasureError::DimMismatch(a.len(), b.len()));
        }
        Ok(match self {
            DistanceMetric::L1 => l1(a, b),
            DistanceMetric::L2 => l2_squared(a, b).sqrt(),
            DistanceMetric::L2Squared => l2_squared(a, b),
        })
    }
}

impl std::fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DistanceMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L1" | "l1" => Ok(DistanceMetric::L1),
            "L2" | "l2" => Ok(DistanceMetric::L2),
            "L2_squared" | "l2_squared" => Ok(DistanceMetric::L2Squared),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// `-ln p`.
pub fn hale_surprise(p: f64) -> Result<f64, MeasureError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(MeasureError::NonPositiveProbability(p));
    }
    Ok(-p.ln())
}

fn check_distribution(dist: &[f64]) -> Result<(), MeasureError> {
    let total: f64 = dist.iter().sum();
    if dist.is_empty()
        || dist
            .iter()
            .any(|p| !(0.0..=1.0 + DISTRIBUTION_TOLERANCE).contains(p))
        || (total - 1.0).abs() > DISTRIBUTION_TOLERANCE
    {
        return Err(MeasureError::NotADistribution(total));
    }
    Ok(())
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(dist: &[f64]) -> Result<f64, MeasureError> {
    check_distribution(dist)?;
    let h: f64 = dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    Ok(h.max(0.0))
}

/// Entropy at the previous step minus entropy now. Negative when
/// uncertainty grows.
pub fn hale_uncertainty_reduction(h_prev: f64, h_curr: f64) -> f64 {
    h_prev - h_curr
}

pub fn ely_surprise(
    e_prev: &[f64],
    e_curr: &[f64],
    metric: DistanceMetric,
) -> Result<f64, MeasureError> {
    metric.distance(e_prev, e_curr)
}

/// Expected distance from the current state to each candidate next state.
pub fn ely_uncertainty<V: AsRef<[f64]>>(
    e_t: &[f64],
    candidates: &[(V, f64)],
    metric: DistanceMetric,
) -> Result<f64, MeasureError> {
    let probs: Vec<f64> = candidates.iter().map(|(_, p)| *p).collect();
    check_distribution(&probs)?;
    candidates.iter().try_fold(0.0, |acc, (c, p)| {
        Ok(acc + p * metric.distance(e_t, c.as_ref())?)
    })
}

pub fn alpha_ely_surprise(
    alpha_t: f64,
    e_prev: &[f64],
    e_curr: &[f64],
    metric: DistanceMetric,
) -> Result<f64, MeasureError> {
    if alpha_t < 0.0 || alpha_t.is_nan() {
        return Err(MeasureError::NegativeAlpha(alpha_t));
    }
    Ok(alpha_t * ely_surprise(e_prev, e_curr, metric)?)
}

/// Expected importance-weighted distance; each candidate carries its own
/// weight.
pub fn alpha_ely_uncertainty<V: AsRef<[f64]>>(
    e_t: &[f64],
    candidates: &[(V, f64, f64)],
    metric: DistanceMetric,
) -> Result<f64, MeasureError> {
    if let Some(&(_, _, a)) = candidates.iter().find(|(_, _, a)| *a < 0.0 || a.is_nan()) {
        return Err(MeasureError::NegativeAlpha(a));
    }
    weighted_uncertainty(e_t, candidates, metric)
}

/// Same as [`alpha_ely_uncertainty`] without the sign check; used for
/// signed importance weights.
pub(crate) fn weighted_uncertainty<V: AsRef<[f64]>>(
    e_t: &[f64],
    candidates: &[(V, f64, f64)],
    metric: DistanceMetric,
) -> Result<f64, MeasureError> {
    let probs: Vec<f64> = candidates.iter().map(|(_, p, _)| *p).collect();
    check_distribution(&probs)?;
    candidates.iter().try_fold(0.0, |acc, (c, p, a)| {
        Ok(acc + p * a * metric.distance(e_t, c.as_ref())?)
    })
}

/// `1 - |A ∩ B| / |A ∪ B|` over token sets; two empty sets count as no change.
pub fn baseline_word_overlap<S: AsRef<str>>(prev: &[S], curr: &[S]) -> f64 {
    1.0 - jaccard(prev, curr)
}

pub fn jaccard<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    use std::collections::HashSet;
    let a: HashSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: HashSet<&str> = b.iter().map(AsRef::as_ref).collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// `1 - cos(prev, curr)`, in `[0, 2]`.
pub fn baseline_embedding_change(v_prev: &[f64], v_curr: &[f64]) -> Result<f64, MeasureError> {
    if v_prev.len() != v_curr.len() {
        return Err(MeasureError::DimMismatch(v_prev.len(), v_curr.len()));
    }
    cosine(v_prev, v_curr)
        .map(|c| 1.0 - c)
        .ok_or(MeasureError::ZeroNormVector)
}

/// Standardises the present values to mean 0 and sample standard
/// deviation 1. Absent positions stay absent.
pub fn zscore(series: &[Option<f64>]) -> Result<Vec<Option<f64>>, MeasureError> {
    let present: Vec<f64> = series.iter().flatten().copied().collect();
    if present.len() < 2 {
        return Err(MeasureError::DegenerateSeries);
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let var = present.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    // relative guard: rounding noise on a constant series is not spread
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(MeasureError::DegenerateSeries);
    }
    Ok(series.iter().map(|v| v.map(|x| (x - mean) / sd)).collect())
}
