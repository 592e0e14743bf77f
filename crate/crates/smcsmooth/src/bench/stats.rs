//! Summary statistics for experiment records: quantiles, interquartile
//! ranges, log-log slope fits and bootstrap standard errors for medians.

use crate::rng::stream_rng;
use rand::RngExt as _;

/// Linear-interpolation quantile of an unsorted sample (type-7).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(&sorted, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Interquartile range.
pub fn iqr(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean.
pub fn standard_error(values: &[f64]) -> f64 {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        / (values.len().saturating_sub(1)) as f64;
    (var / values.len() as f64).sqrt()
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `log y` against `log x`, dropping non-positive pairs.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&a, &b) in x.iter().zip(y) {
        if a > 0.0 && b > 0.0 {
            lx.push(a.ln());
            ly.push(b.ln());
        }
    }
    if lx.len() < 2 {
        return None;
    }
    Some(linear_fit(&lx, &ly).0)
}

/// Bootstrap standard error of the median (resampling with replacement).
/// Heavy-tailed inputs make the usual normal-theory error unusable, hence
/// the resampling route. Deterministic for a fixed input.
pub fn bootstrap_median_se(values: &[f64], resamples: usize) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut rng = stream_rng(0x9E3779B97F4A7C15, values.len() as u64);
    let mut medians = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; values.len()];
    for _ in 0..resamples {
        for b in buf.iter_mut() {
            *b = values[rng.random_range(0..values.len())];
        }
        medians.push(median(&buf));
    }
    let m = mean(&medians);
    (medians.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (resamples - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_of_known_sample() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&v, 0.75), 4.0);
        assert_eq!(iqr(&v), 2.0);
    }

    #[test]
    fn identical_values_have_zero_iqr() {
        assert_eq!(iqr(&[2.5; 10]), 0.0);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = (1..50).map(|t| t as f64).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t * t).collect();
        let slope = log_log_slope(&x, &y).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_se_is_deterministic_and_positive() {
        let v: Vec<f64> = (0..40).map(|i| (i as f64).sin() * 3.0).collect();
        let a = bootstrap_median_se(&v, 500);
        let b = bootstrap_median_se(&v, 500);
        assert_eq!(a, b);
        assert!(a > 0.0);
    }
}
