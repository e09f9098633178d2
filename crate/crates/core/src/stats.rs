//! Replicate summaries and the two-sample chi-square test.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Pairwise (cascade) summation. Deterministic for a given slice order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}

/// Mean, sample standard deviation and normal-approximation 95% interval of
/// replicate estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Summary {
    /// Fields are NaN when fewer than two values are given (the mean is
    /// defined for one value, the spread is not).
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        let mean = if count == 0 {
            f64::NAN
        } else {
            pairwise_sum(values) / count as f64
        };
        let (sd, ci_low, ci_high) = if count < 2 {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let squares: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
            let sd = (pairwise_sum(&squares) / (count - 1) as f64).sqrt();
            let half = Z_95 * sd / (count as f64).sqrt();
            (sd, mean - half, mean + half)
        };
        Summary {
            count,
            mean,
            sd,
            ci_low,
            ci_high,
        }
    }

    pub fn standard_error(&self) -> f64 {
        self.sd / (self.count as f64).sqrt()
    }

    /// The interval is defined and excludes zero.
    pub fn decisive(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

/// Result of a two-sample chi-square homogeneity test on histograms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Chi-square test that two histograms over the same cells come from the
/// same distribution. Cells empty in both samples are dropped.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareTest {
    assert_eq!(a.len(), b.len(), "histograms must share cells");
    let total_a: u64 = a.iter().sum();
    let total_b: u64 = b.iter().sum();
    let total = (total_a + total_b) as f64;
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&ca, &cb) in a.iter().zip(b) {
        let column = (ca + cb) as f64;
        if column == 0.0 {
            continue;
        }
        cells += 1;
        let expected_a = column * total_a as f64 / total;
        let expected_b = column * total_b as f64 / total;
        statistic += (ca as f64 - expected_a).powi(2) / expected_a + (cb as f64 - expected_b).powi(2) / expected_b;
    }
    let degrees_of_freedom = cells.saturating_sub(1);
    let p_value = if degrees_of_freedom == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(degrees_of_freedom as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(statistic)
    };
    ChiSquareTest {
        statistic,
        degrees_of_freedom,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn summary_values() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_relative_eq!(s.sd, (5.0f64 / 3.0).sqrt());
        assert!(s.ci_low < s.mean && s.mean < s.ci_high);
        assert_relative_eq!(s.ci_high - s.mean, Z_95 * s.sd / 2.0);
        let one = Summary::of(&[0.3]);
        assert_eq!(one.mean, 0.3);
        assert!(one.sd.is_nan() && !one.decisive());
        assert!(Summary::of(&[]).mean.is_nan());
    }

    #[test]
    fn chi_square_known_value() {
        // 2x2 table [[10, 20], [20, 10]]: statistic 20/3, one degree of freedom
        let t = chi_square_two_sample(&[10, 20], &[20, 10]);
        assert_relative_eq!(t.statistic, 20.0 / 3.0, max_relative = 1e-12);
        assert_eq!(t.degrees_of_freedom, 1);
        assert_relative_eq!(t.p_value, 0.009823274507519, max_relative = 1e-6);
    }

    #[test]
    fn chi_square_identical_and_sparse() {
        let t = chi_square_two_sample(&[5, 0, 7], &[5, 0, 7]);
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.degrees_of_freedom, 1);
        assert_relative_eq!(t.p_value, 1.0);
        let single = chi_square_two_sample(&[3, 0], &[4, 0]);
        assert_eq!(single.p_value, 1.0);
    }
}
