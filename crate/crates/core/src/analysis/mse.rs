//! Mean squared error of the sample mean of a Gaussian cluster as the
//! sample count grows. It falls as `σ²/n`, the `O(1/n)` rate that makes
//! larger merged buckets easier to estimate.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::analysis::report::VerificationReport;
use crate::analysis::{mean_and_stderr, sub};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Accepted distance of the fitted log-log slope from −1.
pub const SLOPE_TOLERANCE: f64 = 0.1;

/// Per-coordinate MSE of the sample mean, `[size][coordinate]`, for a
/// Gaussian with diagonal standard deviations `std_devs`.
pub fn mse_curve(sizes: &[usize], std_devs: &[f64], trials: u64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if sizes.is_empty() || sizes.iter().any(|&n| n < 2) {
        return Err(Error::config("sample sizes must be at least 2"));
    }
    if std_devs.is_empty() || std_devs.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::config("standard deviations must be finite and non-negative"));
    }
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let dim = std_devs.len();
    let mu: Vec<f64> = (0..dim).map(|i| i as f64 + 1.0).collect();
    sizes
        .iter()
        .enumerate()
        .map(|(si, &n)| {
            let errs: Vec<Vec<f64>> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut r = rng::stream(seed, &[tag::ANALYSIS, sub::MSE, si as u64, t]);
                    let mut sum = vec![0.0; dim];
                    for _ in 0..n {
                        for ((acc, &m), &s) in sum.iter_mut().zip(&mu).zip(std_devs) {
                            let z: f64 = StandardNormal.sample(&mut r);
                            *acc += m + s * z;
                        }
                    }
                    sum.iter().zip(&mu).map(|(&acc, &m)| (acc / n as f64 - m).powi(2)).collect()
                })
                .collect();
            Ok((0..dim)
                .map(|i| {
                    let col: Vec<f64> = errs.iter().map(|e| e[i]).collect();
                    mean_and_stderr(&col).0
                })
                .collect())
        })
        .collect()
}

/// Least-squares slope of `ln mse` against `ln n`, with its standard error.
pub fn loglog_slope(sizes: &[usize], mse: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = mse.iter().map(|m| m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if xs.len() < 3 {
        return (slope, 0.0);
    }
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    (slope, (rss / (k - 2.0) / sxx).sqrt())
}

/// Fits the log-log slope of total MSE against the sample size and passes
/// iff it lies within [`SLOPE_TOLERANCE`] of −1. A zero-variance cluster has
/// zero error at every size; that case passes iff every MSE is exactly 0.
pub fn mse_scaling_demo(sizes: &[usize], std_devs: &[f64], trials: u64, seed: u64) -> Result<VerificationReport> {
    if sizes.len() < 2 {
        return Err(Error::config("need at least two sample sizes"));
    }
    let curve = mse_curve(sizes, std_devs, trials, seed)?;
    let totals: Vec<f64> = curve.iter().map(|c| c.iter().sum()).collect();
    let listing = sizes
        .iter()
        .zip(&totals)
        .map(|(n, m)| format!("{n}:{m:.3e}"))
        .collect::<Vec<_>>()
        .join(" ");
    if std_devs.iter().all(|&s| s == 0.0) {
        let worst = totals.iter().cloned().fold(0.0, f64::max);
        return Ok(VerificationReport::new("mse_zero_variance", trials, worst, 0.0, 0.0, worst == 0.0)
            .note("mse_by_size", listing));
    }
    let (slope, se) = loglog_slope(sizes, &totals);
    Ok(VerificationReport::new(
        "mse_loglog_slope",
        trials,
        slope,
        -1.0,
        se,
        (slope + 1.0).abs() <= SLOPE_TOLERANCE,
    )
    .note("mse_by_size", listing))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_slope() {
        let sizes = [10, 20, 40, 80];
        let mse: Vec<f64> = sizes.iter().map(|&n| 3.0 / n as f64).collect();
        let (s, se) = loglog_slope(&sizes, &mse);
        assert!((s + 1.0).abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn zero_variance_is_exact() {
        let r = mse_scaling_demo(&[4, 8], &[0.0], 5, 0).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.pass);
    }
}
