//! Hashing classes into buckets never increases the KL divergence between
//! two clients' label distributions, and merging classes with different
//! ratios strictly decreases it.

use rand_distr::{Dirichlet, Distribution};
use rayon::prelude::*;

use crate::analysis::report::VerificationReport;
use crate::analysis::{mean_and_stderr, sub};
use crate::error::{Error, Result};
use crate::hashing::LabelHashScheme;
use crate::metrics::{group_sums, kl_divergence, LabelDistribution};
use crate::rng::{self, tag};

/// Tolerance on `KL(ω_a, ω_b) ≤ KL(π_a, π_b)`.
pub const KL_TOLERANCE: f64 = 1e-12;

/// Relative spread of `π_a/π_b` above which two classes count as having
/// different ratios.
const RATIO_SPREAD: f64 = 1e-9;

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    reduction_sum: f64,
    violations: u64,
    strict_failures: u64,
    max_excess: f64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.reduction_sum += o.reduction_sum;
        self.violations += o.violations;
        self.strict_failures += o.strict_failures;
        self.max_excess = self.max_excess.max(o.max_excess);
        self
    }
}

/// One table applied to one pair.
fn check_table(a: &[f64], b: &[f64], kl_classes: f64, assign: &[u32], buckets: usize, tally: &mut Tally) {
    let wa = group_sums(a, assign, buckets);
    let wb = group_sums(b, assign, buckets);
    // Empty buckets carry no mass in either distribution and contribute 0.
    let kl_buckets: f64 = wa
        .iter()
        .zip(&wb)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &y)| x * (x / y).ln())
        .sum();
    let excess = kl_buckets - kl_classes;
    tally.reduction_sum += -excess;
    tally.max_excess = tally.max_excess.max(excess);
    if excess > KL_TOLERANCE {
        tally.violations += 1;
    }
    if merges_distinct_ratios(a, b, assign, buckets) && excess >= 0.0 {
        tally.strict_failures += 1;
    }
}

fn merges_distinct_ratios(a: &[f64], b: &[f64], assign: &[u32], buckets: usize) -> bool {
    let mut lo = vec![f64::INFINITY; buckets];
    let mut hi = vec![0.0f64; buckets];
    for ((&x, &y), &g) in a.iter().zip(b).zip(assign) {
        let q = x / y;
        lo[g as usize] = lo[g as usize].min(q);
        hi[g as usize] = hi[g as usize].max(q);
    }
    lo.iter().zip(&hi).any(|(&l, &h)| l.is_finite() && h > l * (1.0 + RATIO_SPREAD))
}

fn table_assignments(p: usize, buckets: usize, count: u64, seed: u64) -> Result<Vec<Vec<u32>>> {
    (0..count)
        .into_par_iter()
        .map(|t| {
            let s = rng::derive_seed(seed, &[tag::ANALYSIS, sub::THEOREM3_TABLES, buckets as u64, t]);
            Ok(LabelHashScheme::generate(p, buckets, 1, s)?.assignments(0))
        })
        .collect()
}

fn report_from(statement: String, trials: u64, per_unit: &[f64], tally: Tally, kl_classes: Option<f64>) -> VerificationReport {
    let (mean, se) = mean_and_stderr(per_unit);
    let mut r = VerificationReport::new(
        statement,
        trials,
        mean,
        0.0,
        se,
        tally.violations == 0 && tally.strict_failures == 0,
    )
    .note("violations", tally.violations)
    .note("strict_failures", tally.strict_failures)
    .note("max_excess", tally.max_excess);
    if let Some(kl) = kl_classes {
        r = r.note("kl_classes", kl);
    }
    r
}

/// `KL(ω_a, ω_b) ≤ KL(π_a, π_b)` over `trials` random single tables with
/// `B` buckets, with strict inequality whenever a bucket merges classes
/// whose ratios `π_a/π_b` differ. The statistic is the mean KL reduction.
pub fn verify_theorem3(
    pi_a: &LabelDistribution,
    pi_b: &LabelDistribution,
    num_buckets: usize,
    trials: u64,
    seed: u64,
) -> Result<VerificationReport> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let kl_classes = kl_divergence(pi_a, pi_b)?;
    let tables = table_assignments(pi_a.len(), num_buckets, trials, seed)?;
    let (a, b) = (pi_a.proportions(), pi_b.proportions());
    let outcomes: Vec<Tally> = tables
        .par_iter()
        .map(|assign| {
            let mut t = Tally::default();
            check_table(a, b, kl_classes, assign, num_buckets, &mut t);
            t
        })
        .collect();
    let reductions: Vec<f64> = outcomes.iter().map(|t| t.reduction_sum).collect();
    let tally = outcomes.into_iter().fold(Tally::default(), Tally::merge);
    Ok(report_from(
        format!("theorem3_B{num_buckets}"),
        trials,
        &reductions,
        tally,
        Some(kl_classes),
    ))
}

/// Draw `pairs` Dirichlet(1) distribution pairs over `p` classes and apply
/// each of `schemes` random tables per bucket count to every pair.
///
/// Returns one report per entry of `bucket_counts`, then a report checking
/// that the mean reduction grows as `B` shrinks, within three standard
/// errors of the difference. Standard errors are taken over per-pair means.
pub fn theorem3_sweep(
    p: usize,
    bucket_counts: &[usize],
    pairs: u64,
    schemes: u64,
    seed: u64,
) -> Result<Vec<VerificationReport>> {
    if pairs == 0 || schemes == 0 || bucket_counts.is_empty() {
        return Err(Error::config("need at least one pair, scheme and bucket count"));
    }
    if p < 2 {
        return Err(Error::config("need at least two classes"));
    }
    let dirichlet = Dirichlet::new(&vec![1.0; p]).map_err(|e| Error::config(e.to_string()))?;
    let dists: Vec<(LabelDistribution, LabelDistribution, f64)> = (0..pairs)
        .map(|i| {
            let mut r = rng::stream(seed, &[tag::ANALYSIS, sub::THEOREM3_PAIRS, i]);
            let a = LabelDistribution::from_weights(&dirichlet.sample(&mut r))?;
            let b = LabelDistribution::from_weights(&dirichlet.sample(&mut r))?;
            let kl = kl_divergence(&a, &b)?;
            Ok((a, b, kl))
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(bucket_counts.len() + 1);
    let mut summaries = Vec::with_capacity(bucket_counts.len());
    for &buckets in bucket_counts {
        let tables = table_assignments(p, buckets, schemes, seed)?;
        let per_pair: Vec<Tally> = dists
            .par_iter()
            .map(|(a, b, kl)| {
                let mut t = Tally::default();
                for assign in &tables {
                    check_table(a.proportions(), b.proportions(), *kl, assign, buckets, &mut t);
                }
                t
            })
            .collect();
        let means: Vec<f64> = per_pair.iter().map(|t| t.reduction_sum / schemes as f64).collect();
        let tally = per_pair.into_iter().fold(Tally::default(), Tally::merge);
        let r = report_from(format!("theorem3_B{buckets}"), pairs * schemes, &means, tally, None);
        summaries.push((buckets, r.statistic, r.stderr));
        reports.push(r);
    }

    summaries.sort_by(|x, y| y.0.cmp(&x.0));
    let mut worst = (f64::INFINITY, 0.0);
    let mut ok = true;
    for w in summaries.windows(2) {
        let diff = w[1].1 - w[0].1;
        let se = (w[0].2 * w[0].2 + w[1].2 * w[1].2).sqrt();
        ok &= diff >= -3.0 * se;
        if diff < worst.0 {
            worst = (diff, se);
        }
    }
    if summaries.len() < 2 {
        worst = (0.0, 0.0);
    }
    reports.push(
        VerificationReport::new("theorem3_monotone", pairs * schemes, worst.0, 0.0, worst.1, ok)
            .note("buckets_descending", summaries.iter().map(|s| s.0.to_string()).collect::<Vec<_>>().join(" ")),
    );
    Ok(reports)
}
