//! Monte-Carlo checks of the two bucket-size statements: the expected
//! positive count of a class's bucket, and the probability that some class
//! pair collides in every table.

use rand::seq::index;
use rayon::prelude::*;

use crate::analysis::report::VerificationReport;
use crate::analysis::{mean_and_stderr, sub};
use crate::data::SparseDataset;
use crate::error::{Error, Result};
use crate::hashing::{min_table_size, HashFunctionSpec, LabelHashScheme};
use crate::rng::{self, tag};

/// Which samples are positive for each class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelIncidence {
    num_samples: usize,
    by_class: Vec<Vec<u32>>,
    independent: bool,
}

impl LabelIncidence {
    /// Class `l` is positive on `counts[l]` samples drawn uniformly without
    /// replacement, independently of every other class.
    pub fn independent(counts: &[usize], num_samples: usize, seed: u64) -> Result<Self> {
        if counts.is_empty() || num_samples == 0 {
            return Err(Error::input("need at least one class and one sample"));
        }
        if let Some(&c) = counts.iter().find(|&&c| c > num_samples) {
            return Err(Error::input(format!("class count {c} exceeds {num_samples} samples")));
        }
        let by_class = counts
            .iter()
            .enumerate()
            .map(|(l, &c)| {
                let mut r = rng::stream(seed, &[tag::ANALYSIS, sub::LEMMA1_LABELS, l as u64]);
                let mut ids: Vec<u32> = index::sample(&mut r, num_samples, c)
                    .into_iter()
                    .map(|i| i as u32)
                    .collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        Ok(LabelIncidence {
            num_samples,
            by_class,
            independent: true,
        })
    }

    /// The labels of a real dataset. Classes are generally correlated, so
    /// checks on this incidence are descriptive.
    pub fn from_dataset(ds: &SparseDataset) -> Self {
        let mut by_class = vec![Vec::new(); ds.num_classes()];
        for (n, labels) in ds.labels().enumerate() {
            for &l in labels {
                by_class[l as usize].push(n as u32);
            }
        }
        LabelIncidence {
            num_samples: ds.len(),
            by_class,
            independent: false,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.by_class.len()
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    /// `n_l`.
    pub fn count(&self, class: usize) -> usize {
        self.by_class[class].len()
    }

    /// `N_lab = Σ n_l`.
    pub fn n_lab(&self) -> usize {
        self.by_class.iter().map(Vec::len).sum()
    }

    pub fn is_independent(&self) -> bool {
        self.independent
    }
}

/// `n_j + (N_lab − n_j)/B − N_lab/B²`.
pub fn lemma1_bound(n_j: usize, n_lab: usize, num_buckets: usize) -> f64 {
    let b = num_buckets as f64;
    n_j as f64 + (n_lab - n_j) as f64 / b - n_lab as f64 / (b * b)
}

/// Positive-sample counts of bucket 0 over `trials` random tables drawn
/// conditionally on `h(class) = 0` by rejection.
fn conditioned_bucket_counts(
    inc: &LabelIncidence,
    num_buckets: usize,
    class: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut r = rng::stream(seed, &[tag::ANALYSIS, sub::LEMMA1_TABLES, class as u64]);
    let mut stamp = vec![0u64; inc.num_samples];
    let mut out = Vec::with_capacity(trials as usize);
    for t in 1..=trials {
        let h = loop {
            let h = HashFunctionSpec::random(&mut r, num_buckets as u64)?;
            if h.eval(class as u64) == 0 {
                break h;
            }
        };
        let mut count = 0u64;
        for (l, samples) in inc.by_class.iter().enumerate() {
            if h.eval(l as u64) != 0 {
                continue;
            }
            for &s in samples {
                let slot = &mut stamp[s as usize];
                if *slot != t {
                    *slot = t;
                    count += 1;
                }
            }
        }
        out.push(count as f64);
    }
    Ok(out)
}

fn check_lemma1_inputs(inc: &LabelIncidence, num_buckets: usize, class: usize, trials: u64) -> Result<()> {
    if num_buckets < 2 {
        return Err(Error::config("the bucket-count check needs B >= 2"));
    }
    if class >= inc.num_classes() {
        return Err(Error::input(format!("class {class} out of range")));
    }
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    Ok(())
}

/// Expected number of samples with a positive union label in the bucket of
/// `class`, against the lower bound `n_j + (N_lab − n_j)/B − N_lab/B²`.
///
/// Passes iff the empirical mean is at least the bound minus three standard
/// errors. The report is asserted only for independent labels.
pub fn verify_lemma1(
    inc: &LabelIncidence,
    num_buckets: usize,
    class: usize,
    trials: u64,
    seed: u64,
) -> Result<VerificationReport> {
    check_lemma1_inputs(inc, num_buckets, class, trials)?;
    let counts = conditioned_bucket_counts(inc, num_buckets, class, trials, seed)?;
    let (mean, se) = mean_and_stderr(&counts);
    let n_j = inc.count(class);
    let bound = lemma1_bound(n_j, inc.n_lab(), num_buckets);
    let report = VerificationReport::new(
        format!("lemma1_B{num_buckets}_class{class}"),
        trials,
        mean,
        bound,
        se,
        mean >= bound - 3.0 * se,
    )
    .note("n_j", n_j)
    .note("n_lab", inc.n_lab())
    .note("counting", "samples whose union label is positive");
    Ok(if inc.independent { report } else { report.descriptive() })
}

/// [`verify_lemma1`] for every class, run in parallel.
pub fn verify_lemma1_all(
    inc: &LabelIncidence,
    num_buckets: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<VerificationReport>> {
    (0..inc.num_classes())
        .into_par_iter()
        .map(|j| verify_lemma1(inc, num_buckets, j, trials, seed))
        .collect()
}

/// Relative growth `(E[B_i] − n_j)/n_j` of a class's positive count after
/// hashing, compared with `claimed` at relative tolerance `rel_tol`.
pub fn verify_bucket_amplification(
    inc: &LabelIncidence,
    num_buckets: usize,
    class: usize,
    trials: u64,
    seed: u64,
    claimed: f64,
    rel_tol: f64,
) -> Result<VerificationReport> {
    check_lemma1_inputs(inc, num_buckets, class, trials)?;
    let n_j = inc.count(class);
    if n_j == 0 {
        return Err(Error::input(format!("class {class} has no positives")));
    }
    let counts = conditioned_bucket_counts(inc, num_buckets, class, trials, seed)?;
    let (mean, se) = mean_and_stderr(&counts);
    let growth = (mean - n_j as f64) / n_j as f64;
    let report = VerificationReport::new(
        format!("lemma1_amplification_B{num_buckets}"),
        trials,
        growth,
        claimed,
        se / n_j as f64,
        (growth - claimed).abs() <= rel_tol * claimed,
    )
    .note("n_j", n_j)
    .note("bucket_mean", mean)
    .note("bound_growth", (lemma1_bound(n_j, inc.n_lab(), num_buckets) - n_j as f64) / n_j as f64);
    Ok(if inc.independent { report } else { report.descriptive() })
}

/// Whether two classes share a bucket in every table of `scheme`.
pub fn has_full_collision(scheme: &LabelHashScheme) -> bool {
    let p = scheme.num_classes();
    let r = scheme.num_tables();
    let mut sig = vec![0u32; p * r];
    for j in 0..r {
        for (c, b) in scheme.assignments(j).into_iter().enumerate() {
            sig[c * r + j] = b;
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_unstable_by(|&x, &y| sig[x * r..(x + 1) * r].cmp(&sig[y * r..(y + 1) * r]));
    order
        .windows(2)
        .any(|w| sig[w[0] * r..(w[0] + 1) * r] == sig[w[1] * r..(w[1] + 1) * r])
}

/// Fraction of random `R`-table schemes in which some class pair collides
/// in all tables, against `δ`.
///
/// Passes iff the fraction is at most `δ + 3·sqrt(δ(1−δ)/trials)`. The
/// report is asserted only when `B` reaches the sufficient size
/// `min_table_size(p, δ, R)`; below it the outcome is descriptive.
pub fn verify_lemma2(
    num_classes: usize,
    num_buckets: usize,
    tables: usize,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<VerificationReport> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let needed = min_table_size(num_classes, delta, tables)?;
    let failures: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = rng::derive_seed(seed, &[tag::ANALYSIS, sub::LEMMA2, t]);
            LabelHashScheme::generate(num_classes, num_buckets, tables, s).map(|sc| has_full_collision(&sc))
        })
        .collect::<Result<_>>()?;
    let fraction = failures.iter().filter(|&&f| f).count() as f64 / trials as f64;
    let se = (delta * (1.0 - delta) / trials as f64).sqrt();
    let report = VerificationReport::new(
        format!("lemma2_p{num_classes}_R{tables}_B{num_buckets}"),
        trials,
        fraction,
        delta,
        se,
        fraction <= delta + 3.0 * se,
    )
    .note("min_table_size", needed);
    Ok(if num_buckets as u64 >= needed {
        report
    } else {
        report.descriptive()
    })
}
