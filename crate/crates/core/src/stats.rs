//! Small numeric helpers shared across the crate.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise (cascade) summation; error grows as O(log n) rather than O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample standard deviation with divisor `n - 1`. Zero for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&dev) / (xs.len() - 1) as f64).sqrt()
}

/// Nearest-rank upper quantile of sorted data: the `ceil(n p)`-th order statistic.
///
/// `n p` is nudged down by 1e-9 before the ceiling so that products such as
/// `0.95 * 500` that land a hair above an integer do not skip a rank.
pub fn nearest_rank_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let n = sorted.len();
    let rank = ((n as f64) * p - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Nearest-rank upper quantile of `|x|` over the sample.
pub fn abs_quantile(xs: &[f64], p: f64) -> f64 {
    let mut a: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    a.sort_by(f64::total_cmp);
    nearest_rank_sorted(&a, p)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("degrees of freedom must be positive")
        .inverse_cdf(p)
}

/// Logistic link.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_and_large() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), 249_750.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0]), 3.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn nearest_rank_upper() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank_sorted(&xs, 0.95), 95.0);
        assert_eq!(nearest_rank_sorted(&xs, 0.951), 96.0);
        assert_eq!(nearest_rank_sorted(&xs, 0.0), 1.0);
        assert_eq!(nearest_rank_sorted(&xs, 1.0), 100.0);
        let ys: Vec<f64> = (1..=500).map(f64::from).collect();
        assert_eq!(nearest_rank_sorted(&ys, 0.95), 475.0);
    }

    #[test]
    fn reference_quantiles() {
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((student_t_quantile(0.975, 1.0) - 12.706_204_736_174_7).abs() < 1e-6);
    }

    #[test]
    fn softplus_and_sigmoid() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0);
    }
}
