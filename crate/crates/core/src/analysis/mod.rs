//! Executable checks of the statements behind label hashing: bucket
//! positive counts, distinguishability of classes across tables, the
//! contraction of KL divergence under bucketing, and the `O(1/n)` error of
//! a sample mean.
//!
//! Every check is deterministic under its seed and returns a
//! [`VerificationReport`]. Monte-Carlo checks pass within three standard
//! errors; deterministic inequalities use a `1e-12` tolerance.

mod buckets;
mod divergence;
mod mse;
mod report;

pub use buckets::{
    has_full_collision, lemma1_bound, verify_bucket_amplification, verify_lemma1, verify_lemma1_all, verify_lemma2,
    LabelIncidence,
};
pub use divergence::{theorem3_sweep, verify_theorem3, KL_TOLERANCE};
pub use mse::{loglog_slope, mse_curve, mse_scaling_demo, SLOPE_TOLERANCE};
pub use report::{reports_from_csv, reports_to_csv, VerificationReport, REPORT_CSV_HEADER};

/// Second-level keys under the analysis stream tag.
mod sub {
    pub const LEMMA1_LABELS: u64 = 1;
    pub const LEMMA1_TABLES: u64 = 2;
    pub const LEMMA2: u64 = 3;
    pub const THEOREM3_PAIRS: u64 = 4;
    pub const THEOREM3_TABLES: u64 = 5;
    pub const MSE: u64 = 6;
}

/// Pairwise summation keeps the rounding error of long sums at
/// `O(ε log n)` and is independent of how trials were scheduled.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean and its standard error `s/√n` (0 for a single value).
pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}
