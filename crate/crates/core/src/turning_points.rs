//! Turning-point prediction in synopses.
//!
//! Each of the five turning points has a prior relative position and a
//! window around it. The prediction for a turning point is the sentence with
//! the highest measure value whose relative position `i / (n - 1)` lies in
//! that window. Predictions are scored by the mean absolute index error as a
//! percentage of synopsis length.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TP_COUNT: usize = 5;

pub const TP_NAMES: [&str; TP_COUNT] = [
    "Opportunity",
    "Change of Plans",
    "Point of No Return",
    "Major Setback",
    "Climax",
];

/// Slack on window bounds so positions computed in floating point land on
/// the intended side.
const WINDOW_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TpError {
    #[error("turning point {0}: no defined value inside its window")]
    EmptyWindow(usize),
    #[error("expected {TP_COUNT} indices, got {0}")]
    LengthMismatch(usize),
    #[error("synopsis length {0} is too short")]
    TooShort(usize),
    #[error("series covers {have} sentences, synopsis has {need}")]
    SeriesTooShort { have: usize, need: usize },
    #[error("invalid turning-point configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: line {line_no}: malformed gold record: {reason}")]
    MalformedLine {
        path: String,
        line_no: usize,
        reason: String,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpConfig {
    pub positions: [f64; TP_COUNT],
    pub half_widths: [f64; TP_COUNT],
}

impl Default for TpConfig {
    fn default() -> Self {
        TpConfig {
            positions: [0.10, 0.25, 0.50, 0.75, 0.90],
            half_widths: [0.10; TP_COUNT],
        }
    }
}

impl TpConfig {
    pub fn validate(&self) -> Result<(), TpError> {
        if self.positions.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(TpError::InvalidConfig(
                "positions must lie in (0, 1)".into(),
            ));
        }
        if self.positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(TpError::InvalidConfig(
                "positions must be strictly increasing".into(),
            ));
        }
        if self.half_widths.iter().any(|w| !(*w > 0.0 && *w < 0.5)) {
            return Err(TpError::InvalidConfig(
                "half-widths must lie in (0, 0.5)".into(),
            ));
        }
        Ok(())
    }

    /// Window of turning point `k` on the relative scale, clipped to [0, 1].
    pub fn window(&self, k: usize) -> (f64, f64) {
        let (p, w) = (self.positions[k], self.half_widths[k]);
        ((p - w).max(0.0), (p + w).min(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpGold {
    pub synopsis_id: String,
    pub tp_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpPrediction {
    pub synopsis_id: String,
    pub indices: [usize; TP_COUNT],
    pub source: String,
}

fn relative(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// Window argmax for each turning point; ties go to the earliest index.
pub fn predict_tps(
    synopsis_id: &str,
    source: &str,
    series: &[Option<f64>],
    config: &TpConfig,
    n: usize,
) -> Result<TpPrediction, TpError> {
    config.validate()?;
    if n < TP_COUNT {
        return Err(TpError::TooShort(n));
    }
    if series.len() < n {
        return Err(TpError::SeriesTooShort {
            have: series.len(),
            need: n,
        });
    }
    let mut indices = [0; TP_COUNT];
    for (k, slot) in indices.iter_mut().enumerate() {
        let (lo, hi) = config.window(k);
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in series.iter().enumerate().take(n) {
            let x = relative(i, n);
            if x < lo - WINDOW_EPS || x > hi + WINDOW_EPS {
                continue;
            }
            if let Some(v) = *v {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
        }
        *slot = best.ok_or(TpError::EmptyWindow(k + 1))?.0;
    }
    Ok(TpPrediction {
        synopsis_id: synopsis_id.to_string(),
        indices,
        source: source.to_string(),
    })
}

/// Fixed-position prediction: `round(pos * (n - 1))`, halves rounded up.
pub fn theory_baseline(n: usize, positions: &[f64]) -> Vec<usize> {
    positions
        .iter()
        .map(|&p| {
            let x = p * n.saturating_sub(1) as f64;
            // nudge before flooring so 0.5 * 101 style products round up
            (x + 0.5 + WINDOW_EPS).floor().max(0.0) as usize
        })
        .collect()
}

/// Mean absolute index error over the five turning points as a percentage of
/// `n - 1`.
pub fn tp_distance(pred: &[usize], gold: &[usize], n: usize) -> Result<f64, TpError> {
    Ok(per_tp_errors(pred, gold, n)?.iter().sum::<f64>() / TP_COUNT as f64)
}

/// Per-turning-point absolute errors, each in percent of `n - 1`.
pub fn per_tp_errors(pred: &[usize], gold: &[usize], n: usize) -> Result<Vec<f64>, TpError> {
    if pred.len() != TP_COUNT {
        return Err(TpError::LengthMismatch(pred.len()));
    }
    if gold.len() != TP_COUNT {
        return Err(TpError::LengthMismatch(gold.len()));
    }
    if n < 2 {
        return Err(TpError::TooShort(n));
    }
    let scale = 100.0 / (n - 1) as f64;
    Ok(pred
        .iter()
        .zip(gold)
        .map(|(&p, &g)| p.abs_diff(g) as f64 * scale)
        .collect())
}

pub fn load_tp_gold(path: impl AsRef<Path>) -> Result<Vec<TpGold>, TpError> {
    let path = path.as_ref();
    read_tp_gold(
        BufReader::new(File::open(path)?),
        &path.display().to_string(),
    )
}

pub fn read_tp_gold<R: BufRead>(reader: R, name: &str) -> Result<Vec<TpGold>, TpError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| TpError::MalformedLine {
            path: name.to_string(),
            line_no: i + 1,
            reason,
        };
        let gold: TpGold = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if gold.tp_indices.len() != TP_COUNT {
            return Err(malformed(format!("expected {TP_COUNT} tp_indices")));
        }
        if gold.tp_indices.windows(2).any(|w| w[1] < w[0]) {
            return Err(malformed("tp_indices must be nondecreasing".into()));
        }
        out.push(gold);
    }
    Ok(out)
}

pub fn write_tp_gold<W: Write>(gold: &[TpGold], mut out: W) -> std::io::Result<()> {
    for g in gold {
        serde_json::to_writer(&mut out, g)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Mean and sample standard deviation of gold positions on the relative
/// scale, per turning point. Useful for deriving priors from annotated data.
pub fn gold_position_stats(gold: &[(TpGold, usize)]) -> Vec<(f64, f64)> {
    (0..TP_COUNT)
        .map(|k| {
            let xs: Vec<f64> = gold
                .iter()
                .map(|(g, n)| relative(g.tp_indices[k], *n))
                .collect();
            let m = xs.iter().sum::<f64>() / xs.len().max(1) as f64;
            let var = if xs.len() > 1 {
                xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
            } else {
                0.0
            };
            (m, var.sqrt())
        })
        .collect()
}

/// Mean of `xs` with a two-sided Student-t interval at level `1 - p`.
/// The interval is `None` with fewer than two values.
pub fn mean_ci(xs: &[f64], p: f64) -> Option<(f64, Option<(f64, f64)>)> {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Some((m, None));
    }
    let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .ok()?
        .inverse_cdf(1.0 - p / 2.0);
    let hw = t * sd / n.sqrt();
    Some((m, Some((m - hw, m + hw))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mean_ci_brackets_mean() {
        let (m, ci) = mean_ci(&[1.0, 2.0, 3.0], 0.05).unwrap();
        assert_eq!(m, 2.0);
        let (lo, hi) = ci.unwrap();
        // t_{0.975, 2} = 4.302653
        assert!((hi - 2.0 - 4.302653 / 3f64.sqrt()).abs() < 1e-5);
        assert!((2.0 - lo - (hi - 2.0)).abs() < 1e-12);
        assert_eq!(mean_ci(&[5.0], 0.05), Some((5.0, None)));
        assert_eq!(mean_ci(&[], 0.05), None);
    }

    #[test]
    fn theory_examples() {
        assert_eq!(theory_baseline(101, &[0.5]), vec![50]);
        assert_eq!(theory_baseline(2, &[0.0]), vec![0]);
        assert_eq!(theory_baseline(51, &[0.9]), vec![45]);
        // 0.25 * 10 = 2.5 rounds up
        assert_eq!(theory_baseline(11, &[0.25]), vec![3]);
    }

    #[test]
    fn distance_examples() {
        let g = [5, 12, 25, 37, 45];
        assert_eq!(tp_distance(&g, &g, 51).unwrap(), 0.0);
        let mut p = g;
        p[2] += 5;
        assert!((tp_distance(&p, &g, 51).unwrap() - 2.0).abs() < 1e-9);
        let shifted = [10, 17, 30, 42, 50];
        assert!((tp_distance(&shifted, &g, 51).unwrap() - 10.0).abs() < 1e-9);
        assert!(matches!(
            tp_distance(&g[..4], &g, 51),
            Err(TpError::LengthMismatch(4))
        ));
    }

    #[test]
    fn unique_max_and_flat_series() {
        let n = 21;
        let mut s = vec![Some(0.0); n];
        s[10] = Some(5.0);
        let p = predict_tps("x", "m", &s, &TpConfig::default(), n).unwrap();
        assert_eq!(p.indices[2], 10);

        let flat = vec![Some(1.0); n];
        let p = predict_tps("x", "m", &flat, &TpConfig::default(), n).unwrap();
        // window starts: 0.0, 0.15, 0.4, 0.65, 0.8 on a 20-step scale
        assert_eq!(p.indices, [0, 3, 8, 13, 16]);
    }

    #[test]
    fn planted_peaks() {
        let n = 101;
        let mut s: Vec<Option<f64>> = (0..n).map(|i| Some((i % 7) as f64 * 0.01)).collect();
        for idx in [10, 25, 50, 75, 90] {
            s[idx] = Some(10.0);
        }
        let p = predict_tps("x", "m", &s, &TpConfig::default(), n).unwrap();
        assert_eq!(p.indices, [10, 25, 50, 75, 90]);
    }

    #[test]
    fn empty_window() {
        let n = 21;
        let mut s = vec![Some(1.0); n];
        for v in s.iter_mut().take(5) {
            *v = None;
        }
        assert!(matches!(
            predict_tps("x", "m", &s, &TpConfig::default(), n),
            Err(TpError::EmptyWindow(1))
        ));
    }

    #[test]
    fn gold_parsing() {
        let ok = "{\"synopsis_id\":\"a\",\"tp_indices\":[1,2,3,4,5]}\n";
        assert_eq!(
            read_tp_gold(ok.as_bytes(), "mem").unwrap()[0].tp_indices,
            vec![1, 2, 3, 4, 5]
        );
        let bad = "{\"synopsis_id\":\"a\",\"tp_indices\":[1,2,3]}\n";
        assert!(read_tp_gold(bad.as_bytes(), "mem").is_err());
    }

    proptest! {
        #[test]
        fn point_windows_return_their_index(
            n in 21usize..200,
            values in proptest::collection::vec(-5.0f64..5.0, 200),
        ) {
            // windows narrower than one sentence step pin the prediction
            let positions = [0.1, 0.3, 0.5, 0.7, 0.9];
            let idx: Vec<usize> = positions.iter().map(|p| ((p * (n - 1) as f64).round()) as usize).collect();
            let exact: Vec<f64> = idx.iter().map(|&i| i as f64 / (n - 1) as f64).collect();
            let cfg = TpConfig {
                positions: [exact[0], exact[1], exact[2], exact[3], exact[4]],
                half_widths: [0.25 / (n - 1) as f64; TP_COUNT],
            };
            let s: Vec<Option<f64>> = values[..n].iter().copied().map(Some).collect();
            let p = predict_tps("x", "m", &s, &cfg, n).unwrap();
            prop_assert_eq!(p.indices.to_vec(), idx);
        }

        #[test]
        fn distance_symmetric_and_shift_invariant(
            a in proptest::array::uniform5(0usize..40),
            b in proptest::array::uniform5(0usize..40),
            shift in 0usize..10,
        ) {
            let n = 50;
            let d = tp_distance(&a, &b, n).unwrap();
            prop_assert!((d - tp_distance(&b, &a, n).unwrap()).abs() < 1e-12);
            let a2: Vec<usize> = a.iter().map(|x| x + shift).collect();
            let b2: Vec<usize> = b.iter().map(|x| x + shift).collect();
            prop_assert!((d - tp_distance(&a2, &b2, n).unwrap()).abs() < 1e-12);
            prop_assert_eq!(d == 0.0, a == b);
        }

        #[test]
        fn theory_monotone(n in 5usize..300) {
            let idx = theory_baseline(n, &TpConfig::default().positions);
            prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
