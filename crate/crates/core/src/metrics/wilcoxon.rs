//! Wilcoxon rank-sum (Mann-Whitney) test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Combined sample sizes up to this use exact enumeration.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Sum of the midranks of `xs` in the pooled sample.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub exact: bool,
}

/// Midranks (1-based, ties averaged) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided rank-sum test of `xs` against `ys`: exact enumeration when the
/// pooled size is at most [`EXACT_LIMIT`], otherwise the tie-corrected
/// normal approximation.
pub fn wilcoxon_rank_sum(xs: &[f64], ys: &[f64]) -> Result<RankSumTest> {
    check(xs, ys)?;
    if xs.len() + ys.len() <= EXACT_LIMIT {
        rank_sum_exact(xs, ys)
    } else {
        rank_sum_normal(xs, ys)
    }
}

fn check(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptyInput("rank-sum test needs two non-empty samples".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("rank-sum test input contains non-finite values".into()));
    }
    Ok(())
}

/// Statistic, its null mean, and the pooled midranks.
fn rank_sum(xs: &[f64], ys: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let ranks = midranks(&pooled);
    let statistic: f64 = ranks[..xs.len()].iter().sum();
    let expected = xs.len() as f64 * (pooled.len() as f64 + 1.0) / 2.0;
    (statistic, expected, ranks, pooled)
}

/// Exact p-value over every assignment of the pooled midranks. Limited to
/// 24 pooled values.
pub fn rank_sum_exact(xs: &[f64], ys: &[f64]) -> Result<RankSumTest> {
    check(xs, ys)?;
    let n = xs.len() + ys.len();
    if n > 24 {
        return Err(Error::Range(format!("exact enumeration over {n} values is too large")));
    }
    let (statistic, expected, ranks, _) = rank_sum(xs, ys);
    let observed = (statistic - expected).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != xs.len() {
            continue;
        }
        let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if (w - expected).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    Ok(RankSumTest { statistic, p_value: extreme as f64 / total as f64, exact: true })
}

/// Normal approximation with tie-corrected variance and a continuity
/// correction of one half.
pub fn rank_sum_normal(xs: &[f64], ys: &[f64]) -> Result<RankSumTest> {
    check(xs, ys)?;
    let (statistic, expected, _, pooled) = rank_sum(xs, ys);
    let (n1, n2, n) = (xs.len() as f64, ys.len() as f64, pooled.len() as f64);
    let ties: f64 = tie_sizes(&pooled).map(|t| t * t * t - t).sum();
    let variance = if n > 1.0 { n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0))) } else { 0.0 };
    if variance <= 0.0 {
        return Ok(RankSumTest { statistic, p_value: 1.0, exact: false });
    }
    let z = ((statistic - expected).abs() - 0.5).max(0.0) / variance.sqrt();
    // Two-sided normal tail: 2 * (1 - Phi(z)) = erfc(z / sqrt 2).
    let p = libm::erfc(z / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0);
    Ok(RankSumTest { statistic, p_value: p, exact: false })
}

fn tie_sizes(values: &[f64]) -> impl Iterator<Item = f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        sizes.push(j as f64);
        i += j;
    }
    sizes.into_iter()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn exact_small_case() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert!(r.exact);
        assert_eq!(r.statistic, 3.0);
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_give_one() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn shift_invariance() {
        let xs = [0.3, 1.7, 2.2, 5.0, 4.1, 3.3, 0.9];
        let ys = [2.5, 3.9, 6.1, 7.7, 5.5, 4.4, 8.0, 1.2];
        let a = wilcoxon_rank_sum(&xs, &ys).unwrap();
        let shift = |v: &[f64]| v.iter().map(|x| x + 100.0).collect::<Vec<_>>();
        let b = wilcoxon_rank_sum(&shift(&xs), &shift(&ys)).unwrap();
        assert_eq!(a, b);
        assert!(!a.exact);
    }

    #[test]
    fn normal_approximation_tracks_exact_at_six_and_six() {
        let cases: [([f64; 6], [f64; 6]); 3] = [
            ([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], [7.0, 8.0, 9.0, 10.0, 11.0, 12.0]),
            ([1.0, 3.0, 5.0, 7.0, 9.0, 11.0], [2.0, 4.0, 6.0, 8.0, 10.0, 12.0]),
            ([1.0, 2.0, 4.0, 7.0, 8.0, 9.0], [3.0, 5.0, 6.0, 10.0, 11.0, 12.0]),
        ];
        for (xs, ys) in cases {
            let e = rank_sum_exact(&xs, &ys).unwrap().p_value;
            let a = rank_sum_normal(&xs, &ys).unwrap().p_value;
            assert!((e - a).abs() < 0.02, "exact {e} vs normal {a}");
        }
    }

    #[test]
    fn all_tied_large_sample() {
        let r = wilcoxon_rank_sum(&[2.0; 10], &[2.0; 10]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(wilcoxon_rank_sum(&[], &[1.0]), Err(Error::EmptyInput(_))));
    }
}
