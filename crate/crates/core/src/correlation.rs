//! Rank correlation and Fisher-z confidence intervals.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CorrelationError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 aligned values with variation in both series")]
    DegenerateSeries,
    #[error("non-finite value in series")]
    NonFinite,
    #[error("Fisher interval needs n > 3, got {0}")]
    TooFewSamples(usize),
    #[error("correlation {0} outside [-1, 1]")]
    InvalidCorrelation(f64),
    #[error("significance level must be in (0, 1), got {0}")]
    InvalidLevel(f64),
}

/// Keeps only positions present in both series.
pub fn align(a: &[Option<f64>], b: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    a.iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip()
}

fn check(a: &[f64], b: &[f64]) -> Result<(), CorrelationError> {
    if a.len() != b.len() {
        return Err(CorrelationError::LengthMismatch(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(CorrelationError::NonFinite);
    }
    if a.len() < 3 {
        return Err(CorrelationError::DegenerateSeries);
    }
    Ok(())
}

/// Fractional ranks starting at 1; ties share their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end averaged
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, CorrelationError> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(CorrelationError::DegenerateSeries);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64, CorrelationError> {
    check(a, b)?;
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Kendall's tau-b, computed with Knight's merge-sort algorithm.
pub fn kendall(a: &[f64], b: &[f64]) -> Result<f64, CorrelationError> {
    check(a, b)?;
    let n = a.len();
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let tie_pairs = |len: usize| (len * (len - 1) / 2) as i64;
    let n0 = tie_pairs(n);
    let (mut n1, mut n3) = (0i64, 0i64);
    let (mut run_x, mut run_xy) = (1usize, 1usize);
    for i in 1..=n {
        let same_x = i < n && pairs[i].0 == pairs[i - 1].0;
        let same_xy = same_x && pairs[i].1 == pairs[i - 1].1;
        if same_x {
            run_x += 1;
        } else {
            n1 += tie_pairs(run_x);
            run_x = 1;
        }
        if same_xy {
            run_xy += 1;
        } else {
            n3 += tie_pairs(run_xy);
            run_xy = 1;
        }
    }

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut ys);

    let mut n2 = 0i64;
    let mut run_y = 1usize;
    for i in 1..=n {
        if i < n && ys[i] == ys[i - 1] {
            run_y += 1;
        } else {
            n2 += tie_pairs(run_y);
            run_y = 1;
        }
    }

    let denom_x = n0 - n1;
    let denom_y = n0 - n2;
    if denom_x == 0 || denom_y == 0 {
        return Err(CorrelationError::DegenerateSeries);
    }
    let s = n0 - n1 - n2 + n3 - 2 * swaps;
    Ok((s as f64 / ((denom_x as f64) * (denom_y as f64)).sqrt()).clamp(-1.0, 1.0))
}

/// Stable merge sort that returns the number of strict inversions.
fn merge_count(xs: &mut [f64]) -> i64 {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut xs[..mid]) + merge_count(&mut xs[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if xs[j] < xs[i] {
            merged.push(xs[j]);
            swaps += (mid - i) as i64;
            j += 1;
        } else {
            merged.push(xs[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&xs[i..mid]);
    merged.extend_from_slice(&xs[j..n]);
    xs.copy_from_slice(&merged);
    swaps
}

/// Two-sided confidence interval for a correlation at level `p` via the
/// Fisher z-transform. A correlation of exactly ±1 yields a point interval.
pub fn fisher_ci(r: f64, n: usize, p: f64) -> Result<(f64, f64), CorrelationError> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(CorrelationError::InvalidCorrelation(r));
    }
    if n <= 3 {
        return Err(CorrelationError::TooFewSamples(n));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(CorrelationError::InvalidLevel(p));
    }
    if r.abs() == 1.0 {
        return Ok((r, r));
    }
    let z = r.atanh();
    let quantile = Normal::standard().inverse_cdf(1.0 - p / 2.0);
    let hw = quantile / ((n - 3) as f64).sqrt();
    Ok(((z - hw).tanh(), (z + hw).tanh()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn spearman_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&a, &a).unwrap(), 1.0);
        assert_eq!(spearman(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_abs_diff_eq!(
            spearman(&a, &[1.0, 3.0, 2.0, 4.0]).unwrap(),
            0.8,
            epsilon = 1e-12
        );
        assert_eq!(
            spearman(&a, &[1.0; 4]),
            Err(CorrelationError::DegenerateSeries)
        );
        assert_eq!(
            spearman(&a[..2], &a[..2]),
            Err(CorrelationError::DegenerateSeries)
        );
    }

    #[test]
    fn kendall_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(kendall(&a, &a).unwrap(), 1.0);
        assert_eq!(kendall(&a, &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_abs_diff_eq!(
            kendall(&a, &[1.0, 3.0, 2.0]).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        // tau-b with ties: x=[1,1,2,3], y=[1,2,2,3]
        // pairs: C=4, D=0, ties only x=1, ties only y=1 -> 4/sqrt(5*5) = 0.8
        assert_abs_diff_eq!(
            kendall(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(),
            0.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn average_rank_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 10.0, 5.0]),
            vec![2.5, 4.0, 2.5, 1.0]
        );
    }

    #[test]
    fn fisher_examples() {
        let (lo, hi) = fisher_ci(0.0, 28, 0.05).unwrap();
        assert_abs_diff_eq!(lo, -0.373, epsilon = 1e-3);
        assert_abs_diff_eq!(hi, 0.373, epsilon = 1e-3);
        let (lo, hi) = fisher_ci(0.0, 4, 0.05).unwrap();
        assert_abs_diff_eq!(hi, 0.961, epsilon = 1e-3);
        assert_abs_diff_eq!(lo, -0.961, epsilon = 1e-3);
        assert_eq!(
            fisher_ci(0.2, 3, 0.05),
            Err(CorrelationError::TooFewSamples(3))
        );
        assert_eq!(fisher_ci(1.0, 10, 0.05).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn align_skips_absent() {
        let (a, b) = align(&[Some(1.0), None, Some(3.0)], &[Some(2.0), Some(5.0), None]);
        assert_eq!((a, b), (vec![1.0], vec![2.0]));
    }

    proptest! {
        #[test]
        fn monotone_invariance(
            xs in proptest::collection::vec(-50i32..50, 3..25),
            ys in proptest::collection::vec(-50i32..50, 25),
        ) {
            let a: Vec<f64> = xs.iter().map(|&x| f64::from(x)).collect();
            let b: Vec<f64> = ys[..a.len()].iter().map(|&y| f64::from(y)).collect();
            let (Ok(r), Ok(t)) = (spearman(&a, &b), kendall(&a, &b)) else {
                return Ok(());
            };
            let a2: Vec<f64> = a.iter().map(|x| (x / 10.0).exp() + 3.0).collect();
            prop_assert!((spearman(&a2, &b).unwrap() - r).abs() < 1e-9);
            prop_assert!((kendall(&a2, &b).unwrap() - t).abs() < 1e-9);
        }

        #[test]
        fn fisher_width_shrinks_with_n(r in -0.95f64..0.95, n in 4usize..500) {
            let (l1, h1) = fisher_ci(r, n, 0.05).unwrap();
            let (l2, h2) = fisher_ci(r, n + 1, 0.05).unwrap();
            prop_assert!(h2 - l2 < h1 - l1);
            prop_assert!(l1 <= r && r <= h1);
        }
    }
}
