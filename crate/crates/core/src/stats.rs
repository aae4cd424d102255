//! Small statistics toolbox: moments, least-squares slopes, log-sum-exp and
//! percentile bootstrap.

use alloc::vec::Vec;

use crate::math::{exp, log, sqrt};
use crate::rng::{Domain, StreamRng};

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

pub fn std_err(v: &[f64]) -> f64 {
    sqrt(variance(v) / v.len() as f64)
}

/// Mean with a normal-approximation 95% interval.
pub fn mean_ci95(v: &[f64]) -> (f64, f64, f64) {
    let m = mean(v);
    let h = if v.len() >= 2 { 1.96 * std_err(v) } else { f64::NAN };
    (m, m - h, m + h)
}

/// Ordinary least squares `y = slope x + intercept`. `None` when fewer than
/// two distinct abscissae.
pub fn ols(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 1e-300) {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Slope of `ln y` against `ln x`; `None` unless all values are positive.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| log(*x)).collect();
    let ly: Vec<f64> = ys.iter().map(|y| log(*y)).collect();
    ols(&lx, &ly).map(|(s, _)| s)
}

/// `ln sum exp(v_i)` with max-shift stabilization.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + log(v.iter().map(|x| exp(x - m)).sum::<f64>())
}

/// `ln mean exp(v_i)`.
pub fn log_mean_exp(v: &[f64]) -> f64 {
    log_sum_exp(v) - log(v.len() as f64)
}

/// Percentile bootstrap interval of `statistic` at coverage `level`.
pub fn bootstrap_ci<F>(values: &[f64], statistic: F, resamples: usize, seed: u64, level: f64) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = values.len();
    if n == 0 || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = StreamRng::new(seed, Domain::Bootstrap, 0);
    let mut buf = alloc::vec![0.0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = values[rng.below(n)];
            }
            statistic(&buf)
        })
        .collect();
    stats.sort_by(|a, b| a.total_cmp(b));
    let tail = 0.5 * (1.0 - level);
    (quantile_sorted(&stats, tail), quantile_sorted(&stats, 1.0 - tail))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = prob.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = crate::math::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (s, i) = ols(&xs, &ys).unwrap();
        assert!((s - 2.5).abs() < 1e-12 && (i + 1.0).abs() < 1e-12);
        assert!(ols(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }

    #[test]
    fn lse_is_stable() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_mean_exp(&[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn bootstrap_brackets_mean() {
        let v: Vec<f64> = (0..200).map(|i| (i % 17) as f64).collect();
        let (lo, hi) = bootstrap_ci(&v, mean, 1000, 3, 0.95);
        let m = mean(&v);
        assert!(lo < m && m < hi);
        assert!(hi - lo < 2.0);
    }
}
